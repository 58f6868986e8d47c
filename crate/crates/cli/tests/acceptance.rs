//! One PASS/FAIL line per acceptance criterion. Runs without the libtest
//! harness so the lines always reach the output.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::path::Path;
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use minimax_support::distributions::{noncentral_t_pdf, DegreesOfFreedom, Noncentrality};
use minimax_support::family::{FoldedNctFamily, LogDensity, Member, SamplingFamily};
use minimax_support::pipeline::{
    compute_statistic, generate_synthetic, render_figure, run_case_study, shift_log_transform, spearman,
    AbundanceTable, CaseStudyOptions, Condition, SynthConfig, TwoSampleModelSpec,
};
use minimax_support::quadrature::QuadratureSpec;
use minimax_support::support::{support, upper_bound_support};
use minimax_support::two_groups::{fit_mixture_heterogeneous, TwoGroupsFit};
use minimax_support::universal::{
    capacity_mixture, capacity_prior, nml_density, nmwl_density, prior_mixture_density, DiscretePrior,
    UniversalDensity, NEGLIGIBLE_MASS,
};
use minimax_support::validation::{
    conservativeness_check, folded_t_for_sample_size, kl_divergence, universality_curve, CurveDensity,
};

type Check = Result<String, String>;
type Criterion = fn() -> Check;

fn folded(nu: f64) -> Arc<dyn SamplingFamily> {
    Arc::new(FoldedNctFamily::new(DegreesOfFreedom::new(nu).unwrap()))
}

fn ensure(ok: bool, msg: String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg)
    }
}

fn within_budget(start: Instant, budget: Duration) -> Result<(), String> {
    let e = start.elapsed();
    ensure(e <= budget, format!("runtime {:.1}s exceeds {}s", e.as_secs_f64(), budget.as_secs()))
}

fn figure_reproduction() -> Check {
    let start = Instant::now();
    let cfg = SynthConfig::default();
    let data = generate_synthetic(&cfg).map_err(|e| e.to_string())?;
    let spec = TwoSampleModelSpec::new(Condition::CancerA, Condition::Healthy).unwrap();
    let study = run_case_study(&data.table, &spec, &CaseStudyOptions::default()).map_err(|e| e.to_string())?;
    ensure(study.features.len() == 20, format!("{} features", study.features.len()))?;
    ensure(!study.has_failures(), "some feature failed".into())?;

    let s: Vec<f64> = study.features.iter().map(|f| f.support_nats.unwrap().as_f64()).collect();
    let m: Vec<f64> = study.features.iter().map(|f| f.simultaneous_nats.unwrap().as_f64()).collect();
    let u: Vec<f64> = study.features.iter().map(|f| f.upper_bound_nats.unwrap().as_f64()).collect();
    let rho = spearman(&s, &m).map_err(|e| e.to_string())?;
    ensure(rho >= 0.9, format!("Spearman {rho:.4} < 0.9"))?;
    let worst = s.iter().zip(&u).map(|(s, u)| u - s).fold(f64::INFINITY, f64::min);
    ensure(worst >= 0.0, format!("upper bound below NMWL support by {:e}", -worst))?;
    ensure(study.features.iter().all(|f| f.df == Some(117.0)), "df differs from 117".into())?;

    // NML exists once the statistic space is truncated
    let t_abs: Vec<f64> = study.features.iter().map(|f| f.t_abs.unwrap()).collect();
    let t_hi = t_abs.iter().cloned().fold(0.0, f64::max) + 10.0;
    let fam: Arc<dyn SamplingFamily> = Arc::new(
        FoldedNctFamily::new(DegreesOfFreedom::new(117.0).unwrap())
            .truncated(t_hi)
            .unwrap(),
    );
    let nml = nml_density(fam.clone(), &QuadratureSpec::default()).map_err(|e| e.to_string())?;
    let null = Member::null(fam.clone());
    let mut gap_dev: f64 = 0.0;
    for &t in &t_abs {
        let sn = support(&nml, &null, t).unwrap().as_f64();
        let ub = upper_bound_support(fam.as_ref(), t).unwrap().as_f64();
        gap_dev = gap_dev.max((ub - sn - nml.log_z()).abs());
    }
    ensure(gap_dev <= 1e-9, format!("NML gap deviates from log Z by {gap_dev:e}"))?;
    let svg = render_figure(&study);
    ensure(
        svg.contains("<circle") && svg.contains("<polygon") && svg.contains("S* = 5"),
        "figure lacks a series or the reference line".into(),
    )?;
    within_budget(start, Duration::from_secs(60))?;
    Ok(format!(
        "Spearman {rho:.4}, min(upper - NMWL) {worst:.4}, max |gap - log Z| {gap_dev:.1e} (log Z {:.4}), {:.1}s",
        nml.log_z(),
        start.elapsed().as_secs_f64()
    ))
}

fn known_priors() -> Vec<DiscretePrior> {
    vec![
        DiscretePrior::point_mass(2.0),
        DiscretePrior::new(vec![1.0, 3.0], vec![0.5, 0.5]).unwrap(),
        DiscretePrior::new(vec![0.5, 2.0, 4.0], vec![0.2, 0.5, 0.3]).unwrap(),
        DiscretePrior::uniform(vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0]).unwrap(),
        DiscretePrior::new(vec![0.0, 6.0], vec![0.5, 0.5]).unwrap(),
    ]
}

fn conservativeness() -> Check {
    let start = Instant::now();
    let q = QuadratureSpec::default();
    let mut worst_z: f64 = 0.0;
    let mut max_analytic = f64::NEG_INFINITY;
    for nu in [17.0, 117.0] {
        let fam = folded(nu);
        let g = nmwl_density(fam.clone(), 0.0, nu as u32 + 2, &q).map_err(|e| e.to_string())?;
        for (k, prior) in known_priors().iter().enumerate() {
            let r = conservativeness_check(fam.clone(), prior, &g, 100_000, 7, &q).map_err(|e| e.to_string())?;
            ensure(
                r.pooled_analytic <= 0.0,
                format!("nu {nu} prior {k}: analytic {} > 0", r.pooled_analytic),
            )?;
            let z = (r.pooled_estimate - r.pooled_analytic).abs() / r.pooled_standard_error;
            ensure(
                z <= 3.0,
                format!("nu {nu} prior {k}: MC {} vs analytic {} ({z:.2} SE)", r.pooled_estimate, r.pooled_analytic),
            )?;
            worst_z = worst_z.max(z);
            max_analytic = max_analytic.max(r.pooled_analytic);
        }
    }
    within_budget(start, Duration::from_secs(120))?;
    Ok(format!(
        "10 cases, max analytic -D {max_analytic:.2e}, worst MC deviation {worst_z:.2} SE, {:.1}s",
        start.elapsed().as_secs_f64()
    ))
}

fn universality() -> Check {
    let start = Instant::now();
    let q = QuadratureSpec::default();
    let sizes = [10, 40, 160, 640];
    let mut finals = Vec::new();
    for theta in [0.5, 2.0, 4.0] {
        let c = universality_curve(folded_t_for_sample_size, theta, &sizes, &CurveDensity::Nmwl { t0: 0.0 }, &q)
            .map_err(|e| e.to_string())?;
        ensure(
            c.is_strictly_decreasing(),
            format!("theta {theta}: D/n not decreasing {:?}", c.kl_per_observation),
        )?;
        ensure(c.last() < 0.01, format!("theta {theta}: final D/n {} >= 0.01", c.last()))?;
        finals.push(format!("{theta}: {:.4}", c.last()));
    }
    within_budget(start, Duration::from_secs(300))?;
    Ok(format!(
        "D/n at n = 640 [{}], {:.1}s",
        finals.join(", "),
        start.elapsed().as_secs_f64()
    ))
}

fn capacity() -> Check {
    let q = QuadratureSpec::default();
    let grid: Vec<f64> = (0..41).map(|i| 8.0 * i as f64 / 40.0).collect();
    let r = capacity_prior(folded(117.0), &grid, &q, 2000, 1e-6).map_err(|e| e.to_string())?;
    ensure(r.converged, format!("not converged after {} iterations", r.iterations))?;
    ensure(r.iterations <= 2000, format!("{} iterations", r.iterations))?;
    ensure(r.gap < 1e-4, format!("gap {:e}", r.gap))?;
    let spread = r
        .prior
        .masses()
        .iter()
        .zip(&r.redundancy)
        .filter(|(&m, _)| m > NEGLIGIBLE_MASS)
        .map(|(_, &d)| r.capacity_upper - d)
        .fold(0.0, f64::max);
    ensure(spread < 1e-4, format!("redundancy spread {spread:e} on the support"))?;
    let mixture = capacity_mixture(folded(117.0), &r, &q).map_err(|e| e.to_string())?;
    let mass = mixture.normalization(&q).map_err(|e| e.to_string())?;
    ensure((mass - 1.0).abs() <= 1e-4, format!("capacity mixture integrates to {mass}"))?;
    let support: Vec<String> = r
        .prior
        .iter()
        .filter(|&(_, m)| m > NEGLIGIBLE_MASS)
        .map(|(t, m)| format!("{t}:{m:.3}"))
        .collect();
    Ok(format!(
        "C = {:.5} nats, gap {:.1e}, spread {spread:.1e}, {} iterations, support [{}]",
        r.capacity(),
        r.gap,
        r.iterations,
        support.join(" ")
    ))
}

/// Two-groups fit to the pooled t statistics of a synthetic table.
fn fit_synthetic(cfg: &SynthConfig) -> Result<TwoGroupsFit, String> {
    let data = generate_synthetic(cfg).map_err(|e| e.to_string())?;
    let (table, _, _) = shift_log_transform(&data.table).map_err(|e| e.to_string())?;
    let spec = TwoSampleModelSpec::new(Condition::CancerA, Condition::Healthy).unwrap();
    let mut items = Vec::new();
    for i in 0..table.n_features() {
        let s = compute_statistic(&table, &spec, i).map_err(|e| e.to_string())?;
        items.push((folded(s.df.value()), s.t_abs));
    }
    let refs: Vec<(&dyn SamplingFamily, f64)> = items.iter().map(|(f, t)| (f.as_ref(), *t)).collect();
    fit_mixture_heterogeneous(&refs).map_err(|e| e.to_string())
}

fn mixture_recovery() -> Check {
    let base = SynthConfig {
        n_features: 200,
        ..SynthConfig::default()
    };
    let mixed = fit_synthetic(&base)?;
    ensure(
        (mixed.pi0_hat - 0.5).abs() <= 0.1 && (mixed.theta_alt_hat - 3.0).abs() <= 0.3,
        format!("(0.5, 3) fitted as ({:.3}, {:.3})", mixed.pi0_hat, mixed.theta_alt_hat),
    )?;
    let null_cfg = SynthConfig { pi0: 1.0, ..base.clone() };
    let null = fit_synthetic(&null_cfg)?;
    ensure(null.pi0_hat >= 0.9, format!("pi0 = 1 fitted as {:.3} (theta {:.3})", null.pi0_hat, null.theta_alt_hat))?;
    Ok(format!(
        "seed {}: (0.5, 3) -> ({:.3}, {:.3}); pi0 = 1 -> {:.3}",
        base.seed, mixed.pi0_hat, mixed.theta_alt_hat, null.pi0_hat
    ))
}

/// Not a criterion: how often other seeds meet the same thresholds.
fn mixture_recovery_seed_rates() -> String {
    let (mut mixed_ok, mut null_ok) = (0, 0);
    let seeds = 1..=10u64;
    for seed in seeds.clone() {
        let cfg = SynthConfig {
            n_features: 200,
            seed,
            ..SynthConfig::default()
        };
        if let Ok(f) = fit_synthetic(&cfg) {
            mixed_ok += usize::from((f.pi0_hat - 0.5).abs() <= 0.1 && (f.theta_alt_hat - 3.0).abs() <= 0.3);
        }
        if let Ok(f) = fit_synthetic(&SynthConfig { pi0: 1.0, ..cfg }) {
            null_ok += usize::from(f.pi0_hat >= 0.9);
        }
    }
    let n = seeds.count();
    format!("seeds 1..={n}: mixture recovered {mixed_ok}/{n}, null pi0_hat >= 0.9 {null_ok}/{n}")
}

fn numerics() -> Check {
    let q = QuadratureSpec::default();
    // normalization of every construction, by the cross-check rule and by
    // an independent Simpson sum
    let mut densities: Vec<(String, UniversalDensity)> = Vec::new();
    for nu in [17.0, 117.0] {
        let fam = folded(nu);
        densities.push((format!("nmwl df {nu}"), nmwl_density(fam.clone(), 0.0, nu as u32 + 2, &q).unwrap()));
        let prior = DiscretePrior::new(vec![0.5, 2.0, 4.0], vec![0.2, 0.5, 0.3]).unwrap();
        densities.push((format!("mixture df {nu}"), prior_mixture_density(fam, prior, &q).unwrap()));
        let trunc: Arc<dyn SamplingFamily> = Arc::new(
            FoldedNctFamily::new(DegreesOfFreedom::new(nu).unwrap())
                .truncated(20.0)
                .unwrap(),
        );
        densities.push((format!("nml df {nu}"), nml_density(trunc, &q).unwrap()));
    }
    let grid: Vec<f64> = (0..41).map(|i| 0.2 * i as f64).collect();
    let cap = capacity_prior(folded(117.0), &grid, &q, 2000, 1e-6).unwrap();
    densities.push(("capacity df 117".into(), capacity_mixture(folded(117.0), &cap, &q).unwrap()));
    let mut worst_norm: f64 = 0.0;
    for (name, g) in &densities {
        let a = g.normalization(&q).map_err(|e| format!("{name}: {e}"))?;
        let (lo, hi) = LogDensity::domain(g);
        let b = common::simpson(|t| g.ln_pdf(t).exp(), lo, hi, 40_000);
        worst_norm = worst_norm.max((a - 1.0).abs()).max((b - 1.0).abs());
        ensure(
            (a - 1.0).abs() <= 1e-4 && (b - 1.0).abs() <= 1e-4,
            format!("{name}: integrates to {a} / {b}"),
        )?;
    }

    // KL from family members to every density, and between members
    let mut min_kl = f64::INFINITY;
    for (name, g) in &densities {
        let fam = g.family().clone();
        for theta in [0.0, 0.5, 1.0, 2.0, 3.0, 4.0, 6.0] {
            let p = Member::new(fam.clone(), theta).unwrap();
            let d = kl_divergence(&p, g, &q).map_err(|e| format!("{name}: {e}"))?.value();
            min_kl = min_kl.min(d);
            let p2 = Member::new(fam.clone(), theta * 0.5 + 0.25).unwrap();
            min_kl = min_kl.min(kl_divergence(&p, &p2, &q).unwrap().value());
        }
    }
    ensure(min_kl >= -1e-8, format!("KL divergence {min_kl:e} below -1e-8"))?;

    let mut worst_rel: f64 = 0.0;
    for &(t, nu, delta) in &common::NCT_POINTS {
        let got = noncentral_t_pdf(t, DegreesOfFreedom::new(nu).unwrap(), Noncentrality::new(delta).unwrap()).unwrap();
        let want = common::nct_pdf(t, nu, delta);
        worst_rel = worst_rel.max((got - want).abs() / want);
    }
    ensure(worst_rel <= 1e-6, format!("noncentral t relative error {worst_rel:e}"))?;

    let labels = [Condition::CancerA; 3].into_iter().chain([Condition::Healthy; 3]).collect();
    let table = AbundanceTable::new(
        vec!["p".into()],
        (1..=6).map(|i| format!("s{i}")).collect(),
        labels,
        vec![[1.0, 2.0, 3.0, 3.0, 4.0, 5.0].map(Some).to_vec()],
    )
    .unwrap();
    let spec = TwoSampleModelSpec::new(Condition::CancerA, Condition::Healthy).unwrap();
    let s = compute_statistic(&table, &spec, 0).unwrap();
    ensure(
        (s.t_abs - 2.4495).abs() <= 1e-4 && s.df.value() == 4.0,
        format!("hand t = {} with df {}", s.t_abs, s.df.value()),
    )?;
    Ok(format!(
        "{} densities within {worst_norm:.1e} of 1, min KL {min_kl:.1e}, nct max rel err {worst_rel:.1e}, hand t {:.5}",
        densities.len(),
        s.t_abs
    ))
}

fn run_cli(args: &[&str]) -> Result<(), String> {
    let o = Command::new(env!("CARGO_BIN_EXE_msupport"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    ensure(
        o.status.code() == Some(0),
        format!("`{}` exited {:?}: {}", args.join(" "), o.status.code(), String::from_utf8_lossy(&o.stderr)),
    )
}

fn same_files(a: &Path, b: &Path, names: &[&str]) -> Result<(), String> {
    for n in names {
        let x = std::fs::read(a.join(n)).map_err(|e| format!("{n}: {e}"))?;
        let y = std::fs::read(b.join(n)).map_err(|e| format!("{n}: {e}"))?;
        ensure(x == y, format!("{n} differs between runs"))?;
    }
    Ok(())
}

fn determinism() -> Check {
    let root = std::env::temp_dir().join(format!("msupport-acceptance-{}", std::process::id()));
    let mut files = Vec::new();
    // identical paths in both runs, since paths are part of the echoed config
    let d = root.join("run");
    for run in ["a", "b"] {
        std::fs::create_dir_all(&d).map_err(|e| e.to_string())?;
        let p = |name: &str| d.join(name).to_str().unwrap().to_string();
        run_cli(&["synth", "--seed", "5", "--missing-rate", "0.02", "-o", &p("table.csv")])?;
        run_cli(&["case-study", "--input", &p("table.csv"), "--cancer-group", "cancer-B", "--out-dir", &p("cs"), "--svg", "--pi0", "0.5,0.9"])?;
        run_cli(&["support", "--df", "117", "--t", "0.5,2,3.5", "--format", "json", "-o", &p("support.json")])?;
        run_cli(&["support", "--input", &p("cs/results.csv"), "--df", "87", "-o", &p("support.csv")])?;
        run_cli(&["fit-mixture", "--input", &p("cs/results.csv"), "--df", "87", "-o", &p("fit.json")])?;
        run_cli(&["simulate", "conservativeness", "--df", "17", "--draws", "20000", "--seed", "7", "-o", &p("cons.json")])?;
        run_cli(&["simulate", "universality", "--theta", "2", "--sizes", "10,40", "-o", &p("univ.json")])?;
        run_cli(&["simulate", "kl", "--p", "nct:2,117", "--q", "nmwl:117", "-o", &p("kl.json")])?;
        run_cli(&["capacity-prior", "-o", &p("capacity.json")])?;
        files = vec![
            "table.csv", "table.csv.meta.json", "cs/results.csv", "cs/metadata.json", "cs/figure.svg", "support.json",
            "support.csv", "support.csv.meta.json", "fit.json", "cons.json", "univ.json", "kl.json", "capacity.json",
        ];
        std::fs::rename(&d, root.join(run)).map_err(|e| e.to_string())?;
    }
    let r = same_files(&root.join("a"), &root.join("b"), &files);
    let _ = std::fs::remove_dir_all(&root);
    r?;
    Ok(format!("{} output files byte-identical across reruns", files.len()))
}

fn main() {
    let criteria: [(&str, Criterion); 7] = [
        ("figure reproduction", figure_reproduction),
        ("conservativeness", conservativeness),
        ("universality", universality),
        ("capacity prior", capacity),
        ("mixture-fit recovery", mixture_recovery),
        ("numerics suite", numerics),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        match check() {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL {name}: {why}");
            }
        }
        if name == "mixture-fit recovery" {
            println!("INFO {name}: {}", mixture_recovery_seed_rates());
        }
    }
    if failed > 0 {
        println!("{failed} of 7 acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all 7 acceptance criteria passed");
}
