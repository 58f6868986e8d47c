//! `case-study`: abundance table to per-feature support, the two-groups
//! fit and the comparison figure.

use std::fs::File;
use std::path::{Path, PathBuf};

use minimax_support::family::DEFAULT_THETA_CAP;
use minimax_support::pipeline::{
    read_labels, render_figure, run_case_study, AbundanceTable, CaseStudyOptions, Condition, TwoSampleModelSpec,
};
use minimax_support::quadrature::{QuadratureSpec, Rule};
use minimax_support::support::{HypotheticalPrior, Unit};
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::quadrature;
use crate::config::merge_options;
use crate::output::{self, err};
use crate::{CliResult, Status};

#[derive(Debug, Default, clap::Args, Deserialize)]
#[serde(default, rename_all = "kebab-case", deny_unknown_fields)]
pub struct Args {
    /// Abundance CSV: feature id column, then one column per sample.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// CSV of `sample,label`; without it labels are read from `sample:label` headers.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Cancer arm to compare (cancer-A or cancer-B).
    #[arg(long)]
    pub cancer_group: Option<Condition>,
    /// Reference group [default: healthy].
    #[arg(long)]
    pub healthy_group: Option<Condition>,
    /// Directory for results.csv, metadata.json and figure.svg [default: .].
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Pseudo-observation count [default: n_cancer + n_healthy per feature].
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
    #[arg(long)]
    pub units: Option<Unit>,
    /// Hypothetical null probabilities for a posterior log-odds readout.
    #[arg(long, value_delimiter = ',')]
    pub pi0: Option<Vec<f64>>,
    /// Also write figure.svg.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub svg: Option<bool>,
}

merge_options!(Args {
    input, labels, cancer_group, healthy_group, out_dir, n_eff, t0, theta_cap, t_max, rule, units, pi0, svg
});

#[derive(Debug, Serialize)]
struct Resolved {
    input: PathBuf,
    labels: Option<PathBuf>,
    cancer_group: Condition,
    healthy_group: Condition,
    n_eff: Option<u32>,
    t0: f64,
    theta_cap: f64,
    quadrature: QuadratureSpec,
    units: Unit,
    pi0: Vec<f64>,
    svg: bool,
}

fn open(path: &Path) -> CliResult<File> {
    File::open(path).map_err(|e| format!("cannot open {}: {e}", path.display()))
}

pub fn run(args: Args) -> CliResult<Status> {
    let input = args.input.ok_or("--input is required")?;
    let cancer_group = args
        .cancer_group
        .ok_or("--cancer-group is required (cancer-A or cancer-B)")?;
    let cfg = Resolved {
        input,
        labels: args.labels,
        cancer_group,
        healthy_group: args.healthy_group.unwrap_or(Condition::Healthy),
        n_eff: args.n_eff,
        t0: args.t0.unwrap_or(0.0),
        theta_cap: args.theta_cap.unwrap_or(DEFAULT_THETA_CAP),
        quadrature: quadrature(args.rule, args.t_max),
        units: args.units.unwrap_or_default(),
        pi0: args.pi0.unwrap_or_default(),
        svg: args.svg.unwrap_or(false),
    };
    let out_dir = args.out_dir.unwrap_or_else(|| PathBuf::from("."));

    let labels = match &cfg.labels {
        Some(p) => Some(read_labels(open(p)?).map_err(|e| format!("{}: {e}", p.display()))?),
        None => None,
    };
    let table = AbundanceTable::from_csv(open(&cfg.input)?, labels.as_ref())
        .map_err(|e| format!("{}: {e}", cfg.input.display()))?;
    let spec = TwoSampleModelSpec::new(cfg.cancer_group, cfg.healthy_group).map_err(err)?;
    let options = CaseStudyOptions {
        n_eff: cfg.n_eff,
        t0: cfg.t0,
        quadrature: cfg.quadrature,
        theta_cap: cfg.theta_cap,
        units: cfg.units,
        hypothetical_pi0: cfg
            .pi0
            .iter()
            .map(|&p| HypotheticalPrior::new(p).map_err(err))
            .collect::<CliResult<_>>()?,
    };
    let study = run_case_study(&table, &spec, &options).map_err(err)?;

    std::fs::create_dir_all(&out_dir).map_err(|e| format!("cannot create {}: {e}", out_dir.display()))?;
    let mut csv = Vec::new();
    study.write_results_csv(&mut csv).map_err(err)?;
    output::write_out(Some(&out_dir.join("results.csv")), &csv)?;
    let doc = json!({
        "metadata": output::metadata("case-study", &cfg),
        "run": study.metadata,
        "fit": study.fit,
        "features": study.features,
    });
    output::write_out(Some(&out_dir.join("metadata.json")), output::json_text(&doc)?.as_bytes())?;
    if cfg.svg {
        output::write_out(Some(&out_dir.join("figure.svg")), render_figure(&study).as_bytes())?;
    }
    Ok(if study.has_failures() { Status::Partial } else { Status::Success })
}
