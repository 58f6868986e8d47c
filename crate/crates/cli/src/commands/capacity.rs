//! `capacity-prior`: Blahut–Arimoto on a parameter grid.

use std::path::PathBuf;
use std::sync::Arc;

use clap::ValueEnum;
use minimax_support::family::{Interval, NormalLocationFamily, SamplingFamily, DEFAULT_THETA_CAP};
use minimax_support::quadrature::{QuadratureSpec, Rule};
use minimax_support::universal::capacity_prior;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{folded_family, quadrature};
use crate::config::merge_options;
use crate::output::{self, err};
use crate::{CliResult, Status};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyKind {
    /// Folded noncentral t with `--df` degrees of freedom.
    FoldedT,
    /// Normal location with `--sigma`, statistic and parameter on [-range, range].
    Normal,
}

#[derive(Debug, Default, clap::Args, Deserialize)]
#[serde(default, rename_all = "kebab-case", deny_unknown_fields)]
pub struct Args {
    #[arg(long, value_enum)]
    pub family: Option<FamilyKind>,
    /// [default: 117]
    #[arg(long)]
    pub df: Option<f64>,
    /// [default: 1]
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Half-width of the normal-location spaces [default: 10].
    #[arg(long)]
    pub range: Option<f64>,
    /// Explicit grid, comma separated; overrides the uniform grid options.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub grid: Option<Vec<f64>>,
    /// [default: 0]
    #[arg(long, allow_negative_numbers = true)]
    pub grid_min: Option<f64>,
    /// [default: 8]
    #[arg(long)]
    pub grid_max: Option<f64>,
    /// [default: 41]
    #[arg(long)]
    pub grid_points: Option<usize>,
    /// [default: 2000]
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Duality-gap tolerance [default: 1e-6].
    #[arg(long)]
    pub tol: Option<f64>,
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

merge_options!(Args {
    family, df, sigma, range, grid, grid_min, grid_max, grid_points, max_iter, tol, theta_cap, t_max, rule, output
});

#[derive(Debug, Serialize)]
struct Resolved {
    family: FamilyKind,
    df: Option<f64>,
    sigma: Option<f64>,
    range: Option<f64>,
    grid: Vec<f64>,
    max_iter: usize,
    tol: f64,
    theta_cap: f64,
    quadrature: QuadratureSpec,
}

pub fn run(args: Args) -> CliResult<Status> {
    let family = args.family.unwrap_or(FamilyKind::FoldedT);
    let grid = match args.grid {
        Some(g) => g,
        None => {
            let (lo, hi) = (args.grid_min.unwrap_or(0.0), args.grid_max.unwrap_or(8.0));
            let n = args.grid_points.unwrap_or(41);
            match n {
                0 => return Err("--grid-points must be positive".into()),
                1 => vec![lo],
                _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
            }
        }
    };
    let is_t = family == FamilyKind::FoldedT;
    let cfg = Resolved {
        family,
        df: is_t.then(|| args.df.unwrap_or(117.0)),
        sigma: (!is_t).then(|| args.sigma.unwrap_or(1.0)),
        range: (!is_t).then(|| args.range.unwrap_or(10.0)),
        grid,
        max_iter: args.max_iter.unwrap_or(2000),
        tol: args.tol.unwrap_or(1e-6),
        theta_cap: args.theta_cap.unwrap_or(DEFAULT_THETA_CAP),
        quadrature: quadrature(args.rule, args.t_max),
    };
    let fam: Arc<dyn SamplingFamily> = match (cfg.df, cfg.sigma, cfg.range) {
        (Some(df), _, _) => folded_family(df, cfg.theta_cap, None)?,
        (None, Some(sigma), Some(l)) => {
            let space = Interval::new(-l, l).map_err(err)?;
            Arc::new(NormalLocationFamily::new(sigma, space, space).map_err(err)?)
        }
        _ => unreachable!("family parameters resolved above"),
    };
    let r = capacity_prior(fam, &cfg.grid, &cfg.quadrature, cfg.max_iter, cfg.tol).map_err(err)?;
    let doc = json!({
        "metadata": output::metadata("capacity-prior", &cfg),
        "prior": {
            "support_points": r.prior.support_points(),
            "masses": r.prior.masses(),
        },
        "diagnostics": {
            "capacity_nats": r.capacity(),
            "capacity_lower": r.capacity_lower,
            "capacity_upper": r.capacity_upper,
            "gap": r.gap,
            "iterations": r.iterations,
            "converged": r.converged,
            "equalization_spread": r.equalization_spread(),
            "redundancy": r.redundancy,
            "output_nodes": r.output_nodes,
            "lower_bound_history": r.lower_bound_history,
        },
    });
    output::write_out(args.output.as_deref(), output::json_text(&doc)?.as_bytes())?;
    Ok(if r.converged { Status::Success } else { Status::Partial })
}
