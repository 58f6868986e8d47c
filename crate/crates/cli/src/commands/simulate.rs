//! `simulate`: conservativeness, universality and KL experiments.

use std::path::PathBuf;
use std::sync::Arc;

use clap::Subcommand;
use minimax_support::family::{LogDensity, Member, SamplingFamily, DEFAULT_THETA_CAP};
use minimax_support::quadrature::{QuadratureSpec, Rule};
use minimax_support::universal::{nml_density, nmwl_density, DiscretePrior};
use minimax_support::validation::{
    conservativeness_check, folded_t_for_sample_size, kl_divergence, universality_curve, CurveDensity, Divergence,
};
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{folded_family, quadrature};
use crate::config::merge_options;
use crate::output::{self, err};
use crate::{CliResult, Status};

#[derive(Debug, Subcommand)]
pub enum Experiment {
    /// Monte-Carlo check that NMWL surrogation errs on the conservative side.
    Conservativeness(ConservativenessArgs),
    /// Per-observation NMWL redundancy across sample sizes.
    Universality(UniversalityArgs),
    /// KL divergence between two densities.
    Kl(KlArgs),
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, rename_all = "kebab-case", deny_unknown_fields)]
pub struct FileSection {
    pub conservativeness: ConservativenessArgs,
    pub universality: UniversalityArgs,
    pub kl: KlArgs,
}

pub fn run(e: Experiment, file: FileSection) -> CliResult<Status> {
    match e {
        Experiment::Conservativeness(a) => conservativeness(a.merge(file.conservativeness)),
        Experiment::Universality(a) => universality(a.merge(file.universality)),
        Experiment::Kl(a) => kl(a.merge(file.kl)),
    }
}

#[derive(Debug, Default, clap::Args, Deserialize)]
#[serde(default, rename_all = "kebab-case", deny_unknown_fields)]
pub struct ConservativenessArgs {
    /// Degrees of freedom, comma separated [default: 17,117].
    #[arg(long, value_delimiter = ',')]
    pub df: Option<Vec<f64>>,
    /// A known prior as `theta:mass,theta:mass`; repeat for several priors.
    #[arg(long)]
    pub prior: Option<Vec<String>>,
    /// Draws per support point [default: 100000].
    #[arg(long)]
    pub draws: Option<usize>,
    /// [default: 7]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Pseudo-observation count [default: df + 2].
    #[arg(long)]
    pub n_eff: Option<u32>,
    #[arg(long)]
    pub t0: Option<f64>,
    #[arg(long)]
    pub theta_cap: Option<f64>,
    #[arg(long)]
    pub t_max: Option<f64>,
    #[arg(long)]
    pub rule: Option<Rule>,
    /// Output JSON file [default: stdout].
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

merge_options!(ConservativenessArgs { df, prior, draws, seed, n_eff, t0, theta_cap, t_max, rule, output });

/// The five mixtures used when no `--prior` is given.
pub const DEFAULT_PRIORS: [&str; 5] = ["2:1", "1:0.5,3:0.5", "0.5:0.2,2:0.5,4:0.3", "0:1,1:1,2:1,3:1,4:1,5:1", "0:0.5,6:0.5"];

pub fn parse_prior(s: &str) -> CliResult<DiscretePrior> {
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (a, b) = part
            .split_once(':')
            .ok_or_else(|| format!("prior component `{part}` is not `theta:mass`"))?;
        let num = |v: &str| v.trim().parse::<f64>().map_err(|_| format!("`{v}` in prior `{s}` is not a number"));
        points.push(num(a)?);
        weights.push(num(b)?);
    }
    DiscretePrior::from_weights(points, weights).map_err(|e| format!("prior `{s}`: {e}"))
}

#[derive(Debug, Serialize)]
struct ConservativenessConfig {
    df: Vec<f64>,
    priors: Vec<String>,
    draws: usize,
    seed: u64,
    n_eff: Option<u32>,
    t0: f64,
    theta_cap: f64,
    quadrature: QuadratureSpec,
}

fn conservativeness(args: ConservativenessArgs) -> CliResult<Status> {
    let cfg = ConservativenessConfig {
        df: args.df.unwrap_or_else(|| vec![17.0, 117.0]),
        priors: args
            .prior
            .unwrap_or_else(|| DEFAULT_PRIORS.iter().map(|s| s.to_string()).collect()),
        draws: args.draws.unwrap_or(100_000),
        seed: args.seed.unwrap_or(7),
        n_eff: args.n_eff,
        t0: args.t0.unwrap_or(0.0),
        theta_cap: args.theta_cap.unwrap_or(DEFAULT_THETA_CAP),
        quadrature: quadrature(args.rule, args.t_max),
    };
    let priors = cfg.priors.iter().map(|s| parse_prior(s)).collect::<CliResult<Vec<_>>>()?;
    let mut reports = Vec::new();
    let mut all_ok = true;
    for &df in &cfg.df {
        let fam = folded_family(df, cfg.theta_cap, None)?;
        let n_eff = cfg.n_eff.unwrap_or_else(|| (df + 2.0).round().max(1.0) as u32);
        let gstar = nmwl_density(fam.clone(), cfg.t0, n_eff, &cfg.quadrature).map_err(err)?;
        for (spec, prior) in cfg.priors.iter().zip(&priors) {
            let r = conservativeness_check(fam.clone(), prior, &gstar, cfg.draws, cfg.seed, &cfg.quadrature)
                .map_err(err)?;
            all_ok &= r.conservative && r.agrees;
            reports.push(json!({"df": df, "n_eff": n_eff, "prior": spec, "report": r}));
        }
    }
    let doc = json!({
        "metadata": output::metadata("simulate conservativeness", &cfg),
        "all_conservative_and_agreeing": all_ok,
        "reports": reports,
    });
    output::write_out(args.output.as_deref(), output::json_text(&doc)?.as_bytes())?;
    Ok(Status::Success)
}

#[derive(Debug, Default, clap::Args, Deserialize)]
#[serde(default, rename_all = "kebab-case", deny_unknown_fields)]
pub struct UniversalityArgs {
    /// Parameter values, comma separated [default: 0.5,2,4].
    #[arg(long, value_delimiter = ',')]
    pub theta: Option<Vec<f64>>,
    /// Total sample sizes, strictly increasing [default: 10,40,160,640].
    #[arg(long, value_delimiter = ',')]
    pub sizes: Option<Vec<u32>>,
    #[arg(long)]
    pub t0: Option<f64>,
    #[arg(long)]
    pub t_max: Option<f64>,
    #[arg(long)]
    pub rule: Option<Rule>,
    /// Output JSON file [default: stdout].
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

merge_options!(UniversalityArgs { theta, sizes, t0, t_max, rule, output });

#[derive(Debug, Serialize)]
struct UniversalityConfig {
    theta: Vec<f64>,
    sizes: Vec<u32>,
    t0: f64,
    df_rule: &'static str,
    n_eff_rule: &'static str,
    quadrature: QuadratureSpec,
}

fn universality(args: UniversalityArgs) -> CliResult<Status> {
    let cfg = UniversalityConfig {
        theta: args.theta.unwrap_or_else(|| vec![0.5, 2.0, 4.0]),
        sizes: args.sizes.unwrap_or_else(|| vec![10, 40, 160, 640]),
        t0: args.t0.unwrap_or(0.0),
        df_rule: "n - 2",
        n_eff_rule: "n",
        quadrature: quadrature(args.rule, args.t_max),
    };
    let density = CurveDensity::Nmwl { t0: cfg.t0 };
    let mut curves = Vec::new();
    for &theta in &cfg.theta {
        let c = universality_curve(folded_t_for_sample_size, theta, &cfg.sizes, &density, &cfg.quadrature)
            .map_err(err)?;
        curves.push(json!({
            "theta": theta,
            "strictly_decreasing": c.is_strictly_decreasing(),
            "final_kl_per_observation": c.last(),
            "curve": c,
        }));
    }
    let doc = json!({
        "metadata": output::metadata("simulate universality", &cfg),
        "curves": curves,
    });
    output::write_out(args.output.as_deref(), output::json_text(&doc)?.as_bytes())?;
    Ok(Status::Success)
}

#[derive(Debug, Default, clap::Args, Deserialize)]
#[serde(default, rename_all = "kebab-case", deny_unknown_fields)]
pub struct KlArgs {
    /// First density: `nct:THETA,DF`, `nmwl:DF[,N_EFF]` or `nml:DF,T_HI`.
    #[arg(long)]
    pub p: Option<String>,
    /// Second density, same forms as --p.
    #[arg(long)]
    pub q: Option<String>,
    #[arg(long)]
    pub theta_cap: Option<f64>,
    #[arg(long)]
    pub t_max: Option<f64>,
    #[arg(long)]
    pub rule: Option<Rule>,
    /// Output JSON file [default: stdout].
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

merge_options!(KlArgs { p, q, theta_cap, t_max, rule, output });

#[derive(Debug, Serialize)]
struct KlConfig {
    p: String,
    q: String,
    theta_cap: f64,
    quadrature: QuadratureSpec,
}

/// Builds a density from its command-line description.
pub fn parse_density(s: &str, theta_cap: f64, q: &QuadratureSpec) -> CliResult<Box<dyn LogDensity>> {
    let (kind, rest) = s
        .split_once(':')
        .ok_or_else(|| format!("density `{s}` is not of the form kind:parameters"))?;
    let nums = rest
        .split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|_| format!("`{v}` in density `{s}` is not a number")))
        .collect::<CliResult<Vec<f64>>>()?;
    let fam = |df: f64, t_hi: Option<f64>| -> CliResult<Arc<dyn SamplingFamily>> { folded_family(df, theta_cap, t_hi) };
    match (kind, nums.as_slice()) {
        ("nct", &[theta, df]) => Ok(Box::new(Member::new(fam(df, None)?, theta).map_err(err)?)),
        ("nmwl", &[df]) => Ok(Box::new(nmwl_density(fam(df, None)?, 0.0, (df + 2.0) as u32, q).map_err(err)?)),
        ("nmwl", &[df, n]) => {
            if !(n >= 1.0 && n.fract() == 0.0) {
                return Err(format!("n_eff in `{s}` must be a positive integer"));
            }
            Ok(Box::new(nmwl_density(fam(df, None)?, 0.0, n as u32, q).map_err(err)?))
        }
        ("nml", &[df, t_hi]) => Ok(Box::new(nml_density(fam(df, Some(t_hi))?, q).map_err(err)?)),
        _ => Err(format!("unrecognized density `{s}` (nct:THETA,DF, nmwl:DF[,N_EFF], nml:DF,T_HI)")),
    }
}

fn kl(args: KlArgs) -> CliResult<Status> {
    let cfg = KlConfig {
        p: args.p.ok_or("--p is required")?,
        q: args.q.ok_or("--q is required")?,
        theta_cap: args.theta_cap.unwrap_or(DEFAULT_THETA_CAP),
        quadrature: quadrature(args.rule, args.t_max),
    };
    let p = parse_density(&cfg.p, cfg.theta_cap, &cfg.quadrature)?;
    let q = parse_density(&cfg.q, cfg.theta_cap, &cfg.quadrature)?;
    let d = kl_divergence(p.as_ref(), q.as_ref(), &cfg.quadrature).map_err(err)?;
    let value = match d {
        Divergence::Finite(v) => json!(v),
        Divergence::Infinite => json!("inf"),
    };
    let doc = json!({
        "metadata": output::metadata("simulate kl", &cfg),
        "kl_nats": value,
    });
    output::write_out(args.output.as_deref(), output::json_text(&doc)?.as_bytes())?;
    Ok(Status::Success)
}
