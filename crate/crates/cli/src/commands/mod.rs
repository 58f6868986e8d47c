pub mod capacity;
pub mod case_study;
pub mod fit;
pub mod simulate;
pub mod support;
pub mod synth;

use std::path::Path;
use std::sync::Arc;

use minimax_support::distributions::DegreesOfFreedom;
use minimax_support::family::{FoldedNctFamily, SamplingFamily};
use minimax_support::quadrature::{QuadratureSpec, Rule};

use crate::output::err;
use crate::CliResult;

/// One statistic with its identifier and, optionally, its own degrees of
/// freedom.
#[derive(Debug, Clone, PartialEq)]
pub struct StatRow {
    pub id: String,
    pub t: f64,
    pub df: Option<f64>,
}

/// Reads `feature_id,t[,df]` with a header row.
pub fn read_stats_csv(path: &Path) -> CliResult<Vec<StatRow>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let header = rdr.headers().map_err(err)?.clone();
    let col = |name: &str| header.iter().position(|h| h == name);
    let id_col = col("feature_id").ok_or_else(|| format!("{}: missing column `feature_id`", path.display()))?;
    let t_col = col("t")
        .or_else(|| col("t_abs"))
        .ok_or_else(|| format!("{}: missing column `t`", path.display()))?;
    let df_col = col("df");
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| format!("{}: row {line}: {e}", path.display()))?;
        let num = |c: usize, name: &str| -> CliResult<f64> {
            let s = rec.get(c).unwrap_or("");
            s.parse::<f64>()
                .map_err(|_| format!("{}: row {line}, column `{name}`: `{s}` is not a number", path.display()))
        };
        let df = match df_col {
            Some(c) if !rec.get(c).unwrap_or("").is_empty() => Some(num(c, "df")?),
            _ => None,
        };
        rows.push(StatRow {
            id: rec.get(id_col).unwrap_or("").to_string(),
            t: num(t_col, "t")?,
            df,
        });
    }
    Ok(rows)
}

/// Rows from `--input` or an inline list, named `t1`, `t2`, ... in the
/// latter case.
pub fn collect_stats(input: Option<&Path>, inline: Option<&[f64]>) -> CliResult<Vec<StatRow>> {
    let rows = match (input, inline) {
        (Some(_), Some(_)) => return Err("give statistics either inline or with --input, not both".into()),
        (Some(p), None) => read_stats_csv(p)?,
        (None, Some(ts)) => ts
            .iter()
            .enumerate()
            .map(|(i, &t)| StatRow {
                id: format!("t{}", i + 1),
                t,
                df: None,
            })
            .collect(),
        (None, None) => return Err("no statistics given (use --t or --input)".into()),
    };
    if rows.is_empty() {
        return Err("no statistics given".into());
    }
    Ok(rows)
}

pub fn folded_family(df: f64, theta_cap: f64, t_hi: Option<f64>) -> CliResult<Arc<dyn SamplingFamily>> {
    let mut fam = FoldedNctFamily::new(DegreesOfFreedom::new(df).map_err(err)?)
        .with_theta_cap(theta_cap)
        .map_err(err)?;
    if let Some(hi) = t_hi {
        fam = fam.truncated(hi).map_err(err)?;
    }
    Ok(Arc::new(fam))
}

pub fn quadrature(rule: Option<Rule>, t_max: Option<f64>) -> QuadratureSpec {
    let mut q = QuadratureSpec::default();
    if let Some(r) = rule {
        q.rule = r;
    }
    if let Some(t) = t_max {
        q.t_max = t;
    }
    q
}
