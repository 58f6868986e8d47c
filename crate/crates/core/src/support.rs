//! Support `S*(t) = ln g1*(t) - ln g0(t)`, the likelihood-ratio upper bound,
//! posterior log-odds under hypothetical prior odds, and unit conversion.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::family::{self, LogDensity, SamplingFamily};

/// A log ratio of densities, with the cases where the null density vanishes
/// kept explicit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "kebab-case")]
pub enum SupportValue {
    Finite(f64),
    /// The null density is zero while the alternative is not.
    Infinite,
    /// Both densities are zero.
    Undefined,
}

impl SupportValue {
    fn from_logs(ln_alt: f64, ln_null: f64) -> Self {
        match (ln_alt == f64::NEG_INFINITY, ln_null == f64::NEG_INFINITY) {
            (true, true) => SupportValue::Undefined,
            (false, true) => SupportValue::Infinite,
            _ => SupportValue::Finite(ln_alt - ln_null),
        }
    }

    pub fn finite(&self) -> Option<f64> {
        match *self {
            SupportValue::Finite(v) => Some(v),
            _ => None,
        }
    }

    /// The value as a float, with `+inf` and NaN for the flagged cases.
    pub fn as_f64(&self) -> f64 {
        match *self {
            SupportValue::Finite(v) => v,
            SupportValue::Infinite => f64::INFINITY,
            SupportValue::Undefined => f64::NAN,
        }
    }
}

fn checked_log(density: &dyn LogDensity, t: f64, what: &str) -> Result<f64> {
    let v = density.ln_pdf(t);
    if v.is_nan() || v == f64::INFINITY {
        return Err(Error::Domain(format!("{what} log density undefined at t = {t}")));
    }
    Ok(v)
}

/// `ln gstar(t) - ln g0(t)` in nats.
pub fn support(gstar: &dyn LogDensity, g0: &dyn LogDensity, t: f64) -> Result<SupportValue> {
    let a = checked_log(gstar, t, "universal")?;
    let b = checked_log(g0, t, "null")?;
    Ok(SupportValue::from_logs(a, b))
}

/// `ln max_theta g(t|theta) - ln g0(t)`, nonnegative because the null
/// parameter lies in the parameter space.
pub fn upper_bound_support(fam: &dyn SamplingFamily, t: f64) -> Result<SupportValue> {
    let est = family::mle(fam, t)?;
    let null = fam.log_density(t, fam.null_theta());
    if null.is_nan() {
        return Err(Error::Numerical(format!("null log density is NaN at t = {t}")));
    }
    Ok(SupportValue::from_logs(est.log_value, null))
}

/// A hypothetical prior probability `pi0` of the null hypothesis.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct HypotheticalPrior(f64);

impl HypotheticalPrior {
    pub fn new(pi0: f64) -> Result<Self> {
        if !(pi0 > 0.0 && pi0 < 1.0) {
            return domain(format!("pi0 must lie strictly between 0 and 1, got {pi0}"));
        }
        Ok(Self(pi0))
    }

    pub fn pi0(&self) -> f64 {
        self.0
    }

    /// `ln(pi1 / pi0)`.
    pub fn prior_log_odds(&self) -> f64 {
        (1.0 - self.0).ln() - self.0.ln()
    }
}

impl TryFrom<f64> for HypotheticalPrior {
    type Error = Error;

    fn try_from(v: f64) -> Result<Self> {
        Self::new(v)
    }
}

impl From<HypotheticalPrior> for f64 {
    fn from(p: HypotheticalPrior) -> f64 {
        p.0
    }
}

/// Posterior log-odds of the alternative: prior log-odds plus support.
pub fn posterior_log_odds(support_nats: f64, prior: HypotheticalPrior) -> f64 {
    prior.prior_log_odds() + support_nats
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Unit {
    #[default]
    Nats,
    Bits,
    Bans,
}

impl Unit {
    pub fn name(&self) -> &'static str {
        match self {
            Unit::Nats => "nats",
            Unit::Bits => "bits",
            Unit::Bans => "bans",
        }
    }
}

impl std::str::FromStr for Unit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nats" | "nat" => Ok(Unit::Nats),
            "bits" | "bit" => Ok(Unit::Bits),
            "bans" | "ban" => Ok(Unit::Bans),
            other => Err(Error::Input(format!("unknown unit `{other}` (nats, bits, bans)"))),
        }
    }
}

pub fn convert_units(support_nats: f64, unit: Unit) -> f64 {
    match unit {
        Unit::Nats => support_nats,
        Unit::Bits => support_nats / std::f64::consts::LN_2,
        Unit::Bans => support_nats / std::f64::consts::LN_10,
    }
}

/// Per-feature support summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportRecord {
    pub feature_id: String,
    pub statistic: f64,
    pub support_nats: SupportValue,
    pub upper_bound_nats: SupportValue,
    pub simultaneous_nats: Option<SupportValue>,
    /// Keyed by the hypothetical `pi0` formatted as a string.
    pub posterior_log_odds: Option<BTreeMap<String, f64>>,
}

impl SupportRecord {
    /// Computes the support and upper bound for `t`; the simultaneous value
    /// and posterior odds are left empty.
    pub fn compute(
        feature_id: impl Into<String>,
        gstar: &dyn LogDensity,
        fam: &Arc<dyn SamplingFamily>,
        t: f64,
    ) -> Result<Self> {
        let null = family::Member::null(fam.clone());
        Ok(Self {
            feature_id: feature_id.into(),
            statistic: t,
            support_nats: support(gstar, &null, t)?,
            upper_bound_nats: upper_bound_support(fam.as_ref(), t)?,
            simultaneous_nats: None,
            posterior_log_odds: None,
        })
    }

    /// Adds posterior log-odds for each hypothetical prior. Leaves the
    /// support untouched.
    pub fn with_posterior_odds(mut self, priors: &[HypotheticalPrior]) -> Self {
        if let Some(s) = self.support_nats.finite() {
            let map = priors
                .iter()
                .map(|p| (format!("{}", p.pi0()), posterior_log_odds(s, *p)))
                .collect();
            self.posterior_log_odds = Some(map);
        }
        self
    }
}
