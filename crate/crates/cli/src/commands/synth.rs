//! `synth`: seeded synthetic abundance table with embedded labels.

use std::path::PathBuf;

use minimax_support::pipeline::{generate_synthetic, SynthConfig};
use serde::Deserialize;

use crate::config::merge_options;
use crate::output::{self, err};
use crate::{CliResult, Status};

#[derive(Debug, Default, clap::Args, Deserialize)]
#[serde(default, rename_all = "kebab-case", deny_unknown_fields)]
pub struct Args {
    /// Fraction of null features [default: 0.5].
    #[arg(long)]
    pub pi0: Option<f64>,
    /// Standardized shift of the alternative features [default: 3].
    #[arg(long)]
    pub theta_alt: Option<f64>,
    /// [default: 20]
    #[arg(long)]
    pub n_features: Option<usize>,
    /// [default: 55]
    #[arg(long)]
    pub n_cancer_a: Option<usize>,
    /// [default: 35]
    #[arg(long)]
    pub n_cancer_b: Option<usize>,
    /// [default: 64]
    #[arg(long)]
    pub n_healthy: Option<usize>,
    /// Within-group standard deviation of log abundance [default: 0.5].
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Probability that a value is missing [default: 0].
    #[arg(long)]
    pub missing_rate: Option<f64>,
    /// [default: 1]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Table CSV [default: stdout].
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// Also write `feature_id,alternative` ground truth here.
    #[arg(long)]
    pub truth: Option<PathBuf>,
}

merge_options!(Args {
    pi0, theta_alt, n_features, n_cancer_a, n_cancer_b, n_healthy, sigma, missing_rate, seed, output, truth
});

pub fn run(args: Args) -> CliResult<Status> {
    let d = SynthConfig::default();
    let cfg = SynthConfig {
        pi0: args.pi0.unwrap_or(d.pi0),
        theta_alt: args.theta_alt.unwrap_or(d.theta_alt),
        n_features: args.n_features.unwrap_or(d.n_features),
        n_cancer_a: args.n_cancer_a.unwrap_or(d.n_cancer_a),
        n_cancer_b: args.n_cancer_b.unwrap_or(d.n_cancer_b),
        n_healthy: args.n_healthy.unwrap_or(d.n_healthy),
        sigma: args.sigma.unwrap_or(d.sigma),
        missing_rate: args.missing_rate.unwrap_or(d.missing_rate),
        seed: args.seed.unwrap_or(d.seed),
        ..d
    };
    let data = generate_synthetic(&cfg).map_err(err)?;
    let mut table = Vec::new();
    data.table.write_csv(&mut table).map_err(err)?;
    output::write_out(args.output.as_deref(), &table)?;
    output::write_sidecar_metadata(args.output.as_deref(), &output::metadata("synth", &cfg))?;
    if let Some(p) = &args.truth {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["feature_id", "alternative"]).map_err(err)?;
        for (id, alt) in data.table.feature_ids.iter().zip(&data.alternative) {
            w.write_record([id.as_str(), if *alt { "true" } else { "false" }]).map_err(err)?;
        }
        output::write_out(Some(p), &w.into_inner().map_err(err)?)?;
    }
    Ok(Status::Success)
}
