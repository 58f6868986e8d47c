//! Case study: abundance table to per-feature statistics, minimax (NMWL)
//! support, simultaneous support from the two-groups fit, and the
//! likelihood-ratio upper bound.

mod svg;
mod synth;
mod table;

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::distributions::DegreesOfFreedom;
use crate::error::{domain, Error, Result};
use crate::family::{self, FoldedNctFamily, Member, SamplingFamily, DEFAULT_THETA_CAP};
use crate::quadrature::QuadratureSpec;
use crate::support::{self, convert_units, posterior_log_odds, HypotheticalPrior, SupportValue, Unit};
use crate::two_groups::{self, TwoGroupsFit};
use crate::universal::{self, UniversalDensity};

pub use svg::render_figure;
pub use synth::{generate_synthetic, SynthConfig, SyntheticData};
pub use table::{read_labels, AbundanceTable, Condition};

pub const SCHEMA_VERSION: u32 = 1;

/// `ln(x + c)` for every value, with `c = 1 + max(0, -min)` over the whole
/// table. Features without any observed value are dropped. Returns the
/// transformed table, `c`, and the dropped feature ids.
pub fn shift_log_transform(table: &AbundanceTable) -> Result<(AbundanceTable, f64, Vec<String>)> {
    let mut min = f64::INFINITY;
    for v in table.values.iter().flatten().flatten() {
        if !v.is_finite() {
            return domain("abundance values must be finite");
        }
        min = min.min(*v);
    }
    let c = 1.0 + if min.is_finite() { (-min).max(0.0) } else { 0.0 };
    let mut out = table.clone();
    let mut dropped = Vec::new();
    let mut keep_ids = Vec::new();
    let mut keep_rows = Vec::new();
    for (id, row) in table.feature_ids.iter().zip(&table.values) {
        if row.iter().all(Option::is_none) {
            log::warn!("feature `{id}` has no observed values and is dropped");
            dropped.push(id.clone());
            continue;
        }
        keep_ids.push(id.clone());
        keep_rows.push(row.iter().map(|v| v.map(|x| (x + c).ln())).collect());
    }
    out.feature_ids = keep_ids;
    out.values = keep_rows;
    Ok((out, c, dropped))
}

/// Which two conditions are compared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TwoSampleModelSpec {
    pub cancer_group: Condition,
    pub healthy_group: Condition,
}

impl TwoSampleModelSpec {
    pub fn new(cancer_group: Condition, healthy_group: Condition) -> Result<Self> {
        if cancer_group == healthy_group {
            return domain("the compared groups must differ");
        }
        Ok(Self {
            cancer_group,
            healthy_group,
        })
    }
}

/// Absolute pooled two-sample t statistic of one feature.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatisticRecord {
    pub feature_id: String,
    /// Infinite (or NaN when the means also coincide) for a degenerate
    /// feature.
    pub t_abs: f64,
    pub df: DegreesOfFreedom,
    pub n_cancer: usize,
    pub n_healthy: usize,
    /// Zero pooled variance.
    pub degenerate: bool,
}

fn group(table: &AbundanceTable, row: usize, c: Condition) -> Vec<f64> {
    table.values[row]
        .iter()
        .zip(&table.labels)
        .filter(|(_, &l)| l == c)
        .filter_map(|(v, _)| *v)
        .collect()
}

/// Complete-case pooled-variance t statistic, absolute value, with
/// `df = n_cancer + n_healthy - 2`.
pub fn compute_statistic(table: &AbundanceTable, spec: &TwoSampleModelSpec, feature: usize) -> Result<StatisticRecord> {
    let id = table
        .feature_ids
        .get(feature)
        .ok_or_else(|| Error::Input(format!("no feature at index {feature}")))?
        .clone();
    let x = group(table, feature, spec.cancer_group);
    let y = group(table, feature, spec.healthy_group);
    if x.len() < 2 || y.len() < 2 {
        return domain(format!(
            "feature `{id}` has {} {} and {} {} observations; need at least 2 each",
            x.len(),
            spec.cancer_group,
            y.len(),
            spec.healthy_group
        ));
    }
    let (n1, n2) = (x.len() as f64, y.len() as f64);
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (m1, m2) = (mean(&x), mean(&y));
    let ss: f64 = x.iter().map(|v| (v - m1).powi(2)).sum::<f64>() + y.iter().map(|v| (v - m2).powi(2)).sum::<f64>();
    let df = n1 + n2 - 2.0;
    let scale = x.iter().chain(&y).map(|v| v.abs()).fold(0.0, f64::max);
    let degenerate = ss <= (f64::EPSILON * scale).powi(2) * (n1 + n2);
    let diff = m1 - m2;
    let t_abs = if degenerate {
        if diff == 0.0 {
            f64::NAN
        } else {
            f64::INFINITY
        }
    } else {
        (diff / (ss / df * (1.0 / n1 + 1.0 / n2)).sqrt()).abs()
    };
    Ok(StatisticRecord {
        feature_id: id,
        t_abs,
        df: DegreesOfFreedom::new(df)?,
        n_cancer: x.len(),
        n_healthy: y.len(),
        degenerate,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaseStudyOptions {
    /// Pseudo-observation count; defaults to `n_cancer + n_healthy` per
    /// feature.
    pub n_eff: Option<u32>,
    pub t0: f64,
    pub quadrature: QuadratureSpec,
    pub theta_cap: f64,
    pub units: Unit,
    pub hypothetical_pi0: Vec<HypotheticalPrior>,
}

impl Default for CaseStudyOptions {
    fn default() -> Self {
        Self {
            n_eff: None,
            t0: 0.0,
            quadrature: QuadratureSpec::default(),
            theta_cap: DEFAULT_THETA_CAP,
            units: Unit::Nats,
            hypothetical_pi0: Vec::new(),
        }
    }
}

/// Outcome for one feature; all support values are in nats.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureResult {
    pub feature_id: String,
    pub t_abs: Option<f64>,
    pub df: Option<f64>,
    pub n_cancer: usize,
    pub n_healthy: usize,
    pub support_nats: Option<SupportValue>,
    pub simultaneous_nats: Option<SupportValue>,
    pub upper_bound_nats: Option<SupportValue>,
    pub posterior_log_odds: BTreeMap<String, f64>,
    pub flags: Vec<String>,
}

impl FeatureResult {
    /// All three support series are available.
    pub fn is_complete(&self) -> bool {
        self.support_nats.is_some() && self.simultaneous_nats.is_some() && self.upper_bound_nats.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormalizerInfo {
    pub df: f64,
    pub n_eff: u32,
    pub log_z: f64,
    pub domain: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaseStudyMetadata {
    pub schema_version: u32,
    pub shift_constant: f64,
    pub cancer_group: Condition,
    pub healthy_group: Condition,
    pub n_eff_rule: String,
    pub t0: f64,
    pub t_max: f64,
    pub theta_cap: f64,
    pub units: Unit,
    pub quadrature: QuadratureSpec,
    pub features_in: usize,
    pub features_dropped: Vec<String>,
    pub missing_values_removed: usize,
    pub normalizers: Vec<NormalizerInfo>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaseStudy {
    pub features: Vec<FeatureResult>,
    pub fit: Option<TwoGroupsFit>,
    pub metadata: CaseStudyMetadata,
}

impl CaseStudy {
    /// Some feature could not be processed completely.
    pub fn has_failures(&self) -> bool {
        self.fit.is_none() || self.features.iter().any(|f| !f.is_complete())
    }

    /// Writes one row per feature in the configured unit.
    pub fn write_results_csv<W: Write>(&self, writer: W) -> Result<()> {
        let u = self.metadata.units;
        let mut w = csv::Writer::from_writer(writer);
        let header = [
            "feature_id".to_string(),
            "t_abs".to_string(),
            "df".to_string(),
            format!("support_{}", u.name()),
            format!("simultaneous_{}", u.name()),
            format!("upper_bound_{}", u.name()),
            "flags".to_string(),
            "schema_version".to_string(),
        ];
        w.write_record(&header).map_err(table::io_err)?;
        let cell = |v: Option<SupportValue>| match v {
            Some(SupportValue::Finite(x)) => format_number(convert_units(x, u)),
            Some(SupportValue::Infinite) => "inf".to_string(),
            Some(SupportValue::Undefined) | None => "NA".to_string(),
        };
        for f in &self.features {
            w.write_record([
                f.feature_id.clone(),
                f.t_abs.map_or("NA".into(), format_number),
                f.df.map_or("NA".into(), format_number),
                cell(f.support_nats),
                cell(f.simultaneous_nats),
                cell(f.upper_bound_nats),
                f.flags.join(";"),
                SCHEMA_VERSION.to_string(),
            ])
            .map_err(table::io_err)?;
        }
        w.flush().map_err(|e| Error::Input(e.to_string()))?;
        Ok(())
    }
}

pub(crate) fn format_number(x: f64) -> String {
    if x.is_nan() {
        "NA".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{x}")
    }
}

fn folded(df: DegreesOfFreedom, cap: f64) -> Result<Arc<dyn SamplingFamily>> {
    Ok(Arc::new(FoldedNctFamily::new(df).with_theta_cap(cap)?))
}

/// Runs the full case study on a raw (untransformed) table.
pub fn run_case_study(raw: &AbundanceTable, spec: &TwoSampleModelSpec, options: &CaseStudyOptions) -> Result<CaseStudy> {
    if options.n_eff == Some(0) {
        return domain("n_eff must be a positive integer");
    }
    let (table, shift, dropped) = shift_log_transform(raw)?;
    let compared = |l: &Condition| *l == spec.cancer_group || *l == spec.healthy_group;
    let missing_values_removed = table
        .values
        .iter()
        .map(|row| row.iter().zip(&table.labels).filter(|(v, l)| v.is_none() && compared(l)).count())
        .sum();

    let stats: Vec<Result<StatisticRecord>> = (0..table.n_features())
        .into_par_iter()
        .map(|i| compute_statistic(&table, spec, i))
        .collect();

    let max_t = stats
        .iter()
        .filter_map(|s| s.as_ref().ok())
        .map(|s| s.t_abs)
        .filter(|t| t.is_finite())
        .fold(0.0, f64::max);
    let q = options.quadrature.with_t_max(options.quadrature.t_max.max(max_t + 10.0));

    let n_eff_of = |s: &StatisticRecord| options.n_eff.unwrap_or((s.n_cancer + s.n_healthy) as u32);
    let keys: BTreeSet<(u64, u32)> = stats
        .iter()
        .filter_map(|s| s.as_ref().ok())
        .filter(|s| !s.degenerate)
        .map(|s| (s.df.value() as u64, n_eff_of(s)))
        .collect();
    let built: Vec<((u64, u32), Result<UniversalDensity>)> = keys
        .par_iter()
        .map(|&(df, n_eff)| {
            let g = DegreesOfFreedom::new(df as f64)
                .and_then(|d| folded(d, options.theta_cap))
                .and_then(|fam| universal::nmwl_density(fam, options.t0, n_eff, &q));
            ((df, n_eff), g)
        })
        .collect();
    let densities: BTreeMap<(u64, u32), Result<UniversalDensity>> = built.into_iter().collect();

    let mut features: Vec<FeatureResult> = stats
        .par_iter()
        .enumerate()
        .map(|(i, s)| feature_result(&table.feature_ids[i], s, &densities, options, &n_eff_of))
        .collect();

    // two-groups fit over the usable statistics
    let usable: Vec<(usize, Arc<dyn SamplingFamily>, f64)> = stats
        .iter()
        .enumerate()
        .filter_map(|(i, s)| s.as_ref().ok().map(|s| (i, s)))
        .filter(|(_, s)| !s.degenerate && s.t_abs.is_finite())
        .filter_map(|(i, s)| folded(s.df, options.theta_cap).ok().map(|f| (i, f, s.t_abs)))
        .collect();
    let fit = if usable.is_empty() {
        None
    } else {
        let items: Vec<(&dyn SamplingFamily, f64)> = usable.iter().map(|(_, f, t)| (f.as_ref(), *t)).collect();
        match two_groups::fit_mixture_heterogeneous(&items) {
            Ok(fit) => Some(fit),
            Err(e) => {
                log::warn!("two-groups fit failed: {e}");
                None
            }
        }
    };
    if let Some(fit) = &fit {
        for (i, fam, t) in &usable {
            let f = &mut features[*i];
            match two_groups::simultaneous_support(fit, fam.as_ref(), *t) {
                Ok(v) => f.simultaneous_nats = Some(v),
                Err(e) => f.flags.push(format!("simultaneous-error: {e}")),
            }
        }
        if !fit.converged {
            for (i, _, _) in &usable {
                features[*i].flags.push("fit-not-converged".into());
            }
        }
    }

    let normalizers = densities
        .iter()
        .filter_map(|(&(df, n_eff), g)| {
            g.as_ref().ok().map(|g| NormalizerInfo {
                df: df as f64,
                n_eff,
                log_z: g.log_z(),
                domain: g.domain(),
            })
        })
        .collect();
    Ok(CaseStudy {
        features,
        fit,
        metadata: CaseStudyMetadata {
            schema_version: SCHEMA_VERSION,
            shift_constant: shift,
            cancer_group: spec.cancer_group,
            healthy_group: spec.healthy_group,
            n_eff_rule: match options.n_eff {
                Some(n) => format!("fixed {n}"),
                None => "n_cancer + n_healthy".into(),
            },
            t0: options.t0,
            t_max: q.t_max,
            theta_cap: options.theta_cap,
            units: options.units,
            quadrature: q,
            features_in: raw.n_features(),
            features_dropped: dropped,
            missing_values_removed,
            normalizers,
        },
    })
}

fn feature_result(
    id: &str,
    stat: &Result<StatisticRecord>,
    densities: &BTreeMap<(u64, u32), Result<UniversalDensity>>,
    options: &CaseStudyOptions,
    n_eff_of: &(dyn Fn(&StatisticRecord) -> u32 + Sync),
) -> FeatureResult {
    let mut r = FeatureResult {
        feature_id: id.to_string(),
        t_abs: None,
        df: None,
        n_cancer: 0,
        n_healthy: 0,
        support_nats: None,
        simultaneous_nats: None,
        upper_bound_nats: None,
        posterior_log_odds: BTreeMap::new(),
        flags: Vec::new(),
    };
    let s = match stat {
        Ok(s) => s,
        Err(e) => {
            r.flags.push(format!("statistic-error: {e}"));
            return r;
        }
    };
    r.t_abs = Some(s.t_abs);
    r.df = Some(s.df.value());
    r.n_cancer = s.n_cancer;
    r.n_healthy = s.n_healthy;
    if s.degenerate {
        r.flags.push("degenerate".into());
        return r;
    }
    let g = match densities.get(&(s.df.value() as u64, n_eff_of(s))) {
        Some(Ok(g)) => g,
        Some(Err(e)) => {
            r.flags.push(format!("density-error: {e}"));
            return r;
        }
        None => {
            r.flags.push("density-error: missing".into());
            return r;
        }
    };
    let fam = g.family().clone();
    let null = Member::null(fam.clone());
    match support::support(g, &null, s.t_abs) {
        Ok(v) => {
            if let Some(x) = v.finite() {
                for p in &options.hypothetical_pi0 {
                    r.posterior_log_odds.insert(format!("{}", p.pi0()), posterior_log_odds(x, *p));
                }
            }
            r.support_nats = Some(v);
        }
        Err(e) => r.flags.push(format!("support-error: {e}")),
    }
    match family::mle(fam.as_ref(), s.t_abs) {
        Ok(est) => {
            if est.hit_cap() {
                r.flags.push("theta-cap".into());
            }
            match support::upper_bound_support(fam.as_ref(), s.t_abs) {
                Ok(v) => r.upper_bound_nats = Some(v),
                Err(e) => r.flags.push(format!("upper-bound-error: {e}")),
            }
        }
        Err(e) => r.flags.push(format!("upper-bound-error: {e}")),
    }
    r
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return domain("spearman needs two equally long samples of size >= 2");
    }
    if a.iter().chain(b).any(|v| v.is_nan()) {
        return domain("spearman input contains NaN");
    }
    let ranks = |v: &[f64]| {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0 + 1.0;
            for k in i..=j {
                r[idx[k]] = avg;
            }
            i = j + 1;
        }
        r
    };
    let (ra, rb) = (ranks(a), ranks(b));
    let n = ra.len() as f64;
    let ma = ra.iter().sum::<f64>() / n;
    let mb = rb.iter().sum::<f64>() / n;
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
    if va == 0.0 || vb == 0.0 {
        return Err(Error::Numerical("spearman undefined for a constant sample".into()));
    }
    Ok(cov / (va * vb).sqrt())
}
