//! `support`: minimax support for individual statistics.

use std::collections::btree_map::{BTreeMap, Entry};
use std::path::PathBuf;
use std::sync::Arc;

use clap::ValueEnum;
use minimax_support::family::{SamplingFamily, DEFAULT_THETA_CAP};
use minimax_support::quadrature::{QuadratureSpec, Rule};
use minimax_support::support::{convert_units, HypotheticalPrior, SupportRecord, SupportValue, Unit};
use minimax_support::universal::{self, UniversalDensity};
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{collect_stats, folded_family, quadrature, StatRow};
use crate::config::merge_options;
use crate::output::{self, err, format_number, SCHEMA_VERSION};
use crate::{CliResult, Status};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Normalized maximum weighted likelihood.
    Nmwl,
    /// Normalized maximum likelihood; needs a bounded statistic space (`--t-hi`).
    Nml,
    /// Mixture over the capacity-achieving prior.
    Capacity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Default, clap::Args, Deserialize)]
#[serde(default, rename_all = "kebab-case", deny_unknown_fields)]
pub struct Args {
    /// Degrees of freedom of the folded t family (rows of --input may override).
    #[arg(long)]
    pub df: Option<f64>,
    /// Statistics, comma separated.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub t: Option<Vec<f64>>,
    /// CSV with columns feature_id, t and optionally df.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub method: Option<Method>,
    /// Pseudo-observation count [default: df + 2].
    #[arg(long)]
    pub n_eff: Option<u32>,
    /// Pseudo-observation location [default: 0].
    #[arg(long)]
    pub t0: Option<f64>,
    /// Upper end of the parameter space [default: 50].
    #[arg(long)]
    pub theta_cap: Option<f64>,
    /// Truncation point for normalizing integrals [default: 20, raised to max t + 10].
    #[arg(long)]
    pub t_max: Option<f64>,
    /// Restrict the statistic space to [0, t_hi].
    #[arg(long)]
    pub t_hi: Option<f64>,
    #[arg(long)]
    pub rule: Option<Rule>,
    #[arg(long)]
    pub units: Option<Unit>,
    /// Hypothetical null probabilities for a posterior log-odds readout.
    #[arg(long, value_delimiter = ',')]
    pub pi0: Option<Vec<f64>>,
    /// Upper end of the capacity grid on [0, grid_max] [default: 8].
    #[arg(long)]
    pub grid_max: Option<f64>,
    /// Number of capacity grid points [default: 41].
    #[arg(long)]
    pub grid_points: Option<usize>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Output file [default: stdout].
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

merge_options!(Args {
    df, t, input, method, n_eff, t0, theta_cap, t_max, t_hi, rule, units, pi0, grid_max, grid_points, format, output
});

#[derive(Debug, Serialize)]
struct Resolved {
    df: Option<f64>,
    input: Option<PathBuf>,
    method: Method,
    n_eff: Option<u32>,
    t0: f64,
    theta_cap: f64,
    t_hi: Option<f64>,
    quadrature: QuadratureSpec,
    units: Unit,
    pi0: Vec<f64>,
    grid_max: f64,
    grid_points: usize,
    format: Format,
}

#[derive(Debug, Serialize)]
struct Row {
    feature_id: String,
    t: f64,
    df: f64,
    n_eff: Option<u32>,
    support: Option<SupportValue>,
    upper_bound: Option<SupportValue>,
    log_z: Option<f64>,
    posterior_log_odds: BTreeMap<String, f64>,
    flags: Vec<String>,
}

fn density(
    fam: Arc<dyn SamplingFamily>,
    cfg: &Resolved,
    n_eff: u32,
    q: &QuadratureSpec,
) -> minimax_support::Result<UniversalDensity> {
    match cfg.method {
        Method::Nmwl => universal::nmwl_density(fam, cfg.t0, n_eff, q),
        Method::Nml => universal::nml_density(fam, q),
        Method::Capacity => {
            let n = cfg.grid_points;
            let grid: Vec<f64> = (0..n)
                .map(|i| if n == 1 { 0.0 } else { cfg.grid_max * i as f64 / (n - 1) as f64 })
                .collect();
            let result = universal::capacity_prior(fam.clone(), &grid, q, 2000, 1e-6)?;
            universal::capacity_mixture(fam, &result, q)
        }
    }
}

pub fn run(args: Args) -> CliResult<Status> {
    let rows = collect_stats(args.input.as_deref(), args.t.as_deref())?;
    let max_t = rows.iter().map(|r| r.t.abs()).filter(|t| t.is_finite()).fold(0.0, f64::max);
    let mut q = quadrature(args.rule, args.t_max);
    q.t_max = q.t_max.max(max_t + 10.0);
    let cfg = Resolved {
        df: args.df,
        input: args.input,
        method: args.method.unwrap_or(Method::Nmwl),
        n_eff: args.n_eff,
        t0: args.t0.unwrap_or(0.0),
        theta_cap: args.theta_cap.unwrap_or(DEFAULT_THETA_CAP),
        t_hi: args.t_hi,
        quadrature: q,
        units: args.units.unwrap_or_default(),
        pi0: args.pi0.unwrap_or_default(),
        grid_max: args.grid_max.unwrap_or(8.0),
        grid_points: args.grid_points.unwrap_or(41),
        format: args.format.unwrap_or(Format::Csv),
    };
    if cfg.grid_points == 0 {
        return Err("--grid-points must be positive".into());
    }
    let priors = cfg
        .pi0
        .iter()
        .map(|&p| HypotheticalPrior::new(p).map_err(err))
        .collect::<CliResult<Vec<_>>>()?;

    // one density per (df, n_eff); construction errors are fatal
    let mut densities: BTreeMap<(u64, u32), (Arc<dyn SamplingFamily>, UniversalDensity)> = BTreeMap::new();
    let mut out = Vec::with_capacity(rows.len());
    let mut partial = false;
    for StatRow { id, t, df } in rows {
        let df = df
            .or(cfg.df)
            .ok_or_else(|| format!("no degrees of freedom for `{id}` (use --df or a df column)"))?;
        let n_eff = match cfg.method {
            Method::Nmwl => Some(cfg.n_eff.unwrap_or_else(|| (df + 2.0).round().max(1.0) as u32)),
            _ => None,
        };
        let key = (df.to_bits(), n_eff.unwrap_or(0));
        let (fam, g) = match densities.entry(key) {
            Entry::Occupied(e) => e.into_mut(),
            Entry::Vacant(e) => {
                let fam = folded_family(df, cfg.theta_cap, cfg.t_hi)?;
                let g = density(fam.clone(), &cfg, n_eff.unwrap_or(1), &cfg.quadrature).map_err(err)?;
                e.insert((fam, g))
            }
        };
        let mut row = Row {
            feature_id: id.clone(),
            t,
            df,
            n_eff,
            support: None,
            upper_bound: None,
            log_z: Some(g.log_z()),
            posterior_log_odds: BTreeMap::new(),
            flags: Vec::new(),
        };
        match SupportRecord::compute(id, g, fam, t) {
            Ok(rec) => {
                let rec = rec.with_posterior_odds(&priors);
                row.support = Some(rec.support_nats);
                row.upper_bound = Some(rec.upper_bound_nats);
                row.posterior_log_odds = rec.posterior_log_odds.unwrap_or_default();
                for (v, name) in [(rec.support_nats, "support"), (rec.upper_bound_nats, "upper-bound")] {
                    match v {
                        SupportValue::Infinite => row.flags.push(format!("{name}-infinite")),
                        SupportValue::Undefined => row.flags.push(format!("{name}-undefined")),
                        SupportValue::Finite(_) => {}
                    }
                }
            }
            Err(e) => {
                partial = true;
                row.flags.push(format!("error: {e}"));
            }
        }
        out.push(row);
    }

    let meta = output::metadata("support", &cfg);
    let bytes = match cfg.format {
        Format::Json => output::json_text(&json!({
            "metadata": meta,
            "units": cfg.units,
            "records": out.iter().map(|r| json_row(r, cfg.units)).collect::<Vec<_>>(),
        }))?
        .into_bytes(),
        Format::Csv => {
            let b = csv_rows(&out, &cfg)?;
            output::write_sidecar_metadata(args.output.as_deref(), &meta)?;
            b
        }
    };
    output::write_out(args.output.as_deref(), &bytes)?;
    Ok(if partial { Status::Partial } else { Status::Success })
}

fn in_units(v: Option<SupportValue>, u: Unit) -> String {
    match v {
        Some(SupportValue::Finite(x)) => format_number(convert_units(x, u)),
        Some(SupportValue::Infinite) => "inf".into(),
        _ => "NA".into(),
    }
}

fn json_row(r: &Row, u: Unit) -> serde_json::Value {
    let value = |v: Option<SupportValue>| {
        v.map(|s| match s {
            SupportValue::Finite(x) => SupportValue::Finite(convert_units(x, u)),
            other => other,
        })
    };
    let odds: BTreeMap<&String, f64> = r.posterior_log_odds.iter().map(|(k, &v)| (k, convert_units(v, u))).collect();
    json!({
        "feature_id": r.feature_id,
        "t": r.t,
        "df": r.df,
        "n_eff": r.n_eff,
        "support": value(r.support),
        "upper_bound": value(r.upper_bound),
        "log_z": r.log_z,
        "posterior_log_odds": odds,
        "flags": r.flags,
    })
}

fn csv_rows(rows: &[Row], cfg: &Resolved) -> CliResult<Vec<u8>> {
    let u = cfg.units.name();
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec![
        "feature_id".to_string(),
        "t".into(),
        "df".into(),
        "n_eff".into(),
        format!("support_{u}"),
        format!("upper_bound_{u}"),
        "log_z".into(),
    ];
    let keys: Vec<String> = cfg.pi0.iter().map(|p| format!("{p}")).collect();
    header.extend(keys.iter().map(|k| format!("posterior_log_odds_pi0_{k}")));
    header.extend(["flags".to_string(), "schema_version".into()]);
    w.write_record(&header).map_err(err)?;
    for r in rows {
        let mut rec = vec![
            r.feature_id.clone(),
            format_number(r.t),
            format_number(r.df),
            r.n_eff.map_or("NA".into(), |n| n.to_string()),
            in_units(r.support, cfg.units),
            in_units(r.upper_bound, cfg.units),
            r.log_z.map_or("NA".into(), format_number),
        ];
        rec.extend(keys.iter().map(|k| r.posterior_log_odds.get(k).map_or("NA".into(), |&v| format_number(convert_units(v, cfg.units)))));
        rec.extend([r.flags.join(";"), SCHEMA_VERSION.to_string()]);
        w.write_record(&rec).map_err(err)?;
    }
    w.into_inner().map_err(err)
}
