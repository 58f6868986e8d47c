//! `fit-mixture`: two-groups maximum-likelihood fit over a list of
//! statistics.

use std::collections::btree_map::{BTreeMap, Entry};
use std::path::PathBuf;
use std::sync::Arc;

use minimax_support::family::{SamplingFamily, DEFAULT_THETA_CAP};
use minimax_support::support::SupportValue;
use minimax_support::two_groups::{fit_mixture_heterogeneous, posterior_probability, simultaneous_support};
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{collect_stats, folded_family};
use crate::config::merge_options;
use crate::output::{self, err};
use crate::{CliResult, Status};

#[derive(Debug, Default, clap::Args, Deserialize)]
#[serde(default, rename_all = "kebab-case", deny_unknown_fields)]
pub struct Args {
    /// Degrees of freedom (rows of --input may override).
    #[arg(long)]
    pub df: Option<f64>,
    /// Statistics, comma separated.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub t: Option<Vec<f64>>,
    /// CSV with columns feature_id, t and optionally df.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub theta_cap: Option<f64>,
    /// Output JSON file [default: stdout].
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

merge_options!(Args { df, t, input, theta_cap, output });

#[derive(Debug, Serialize)]
struct Resolved {
    df: Option<f64>,
    input: Option<PathBuf>,
    theta_cap: f64,
}

pub fn run(args: Args) -> CliResult<Status> {
    let rows = collect_stats(args.input.as_deref(), args.t.as_deref())?;
    let cfg = Resolved {
        df: args.df,
        input: args.input,
        theta_cap: args.theta_cap.unwrap_or(DEFAULT_THETA_CAP),
    };
    let mut families: BTreeMap<u64, Arc<dyn SamplingFamily>> = BTreeMap::new();
    let mut items = Vec::with_capacity(rows.len());
    for r in &rows {
        let df = r
            .df
            .or(cfg.df)
            .ok_or_else(|| format!("no degrees of freedom for `{}` (use --df or a df column)", r.id))?;
        let fam = match families.entry(df.to_bits()) {
            Entry::Occupied(e) => e.get().clone(),
            Entry::Vacant(e) => e.insert(folded_family(df, cfg.theta_cap, None)?).clone(),
        };
        items.push((fam, r.t));
    }
    let refs: Vec<(&dyn SamplingFamily, f64)> = items.iter().map(|(f, t)| (f.as_ref(), *t)).collect();
    let fit = fit_mixture_heterogeneous(&refs).map_err(err)?;

    let mut partial = false;
    let features: Vec<_> = rows
        .iter()
        .zip(&items)
        .map(|(r, (fam, t))| {
            let s = simultaneous_support(&fit, fam.as_ref(), *t);
            let p = posterior_probability(&fit, fam.as_ref(), *t);
            if s.is_err() || p.is_err() {
                partial = true;
            }
            json!({
                "feature_id": r.id,
                "t": r.t,
                "simultaneous_support_nats": s.as_ref().ok().copied().unwrap_or(SupportValue::Undefined),
                "posterior_probability": p.ok().flatten(),
            })
        })
        .collect();
    let doc = json!({
        "metadata": output::metadata("fit-mixture", &cfg),
        "fit": fit,
        "features": features,
    });
    output::write_out(args.output.as_deref(), output::json_text(&doc)?.as_bytes())?;
    Ok(if partial || !fit.converged { Status::Partial } else { Status::Success })
}
