//! Seeded synthetic abundance tables: normal log-abundances with a common
//! variance per feature, and a fraction `1 - pi0` of features whose group
//! means differ by `theta_alt` standard errors.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::table::{AbundanceTable, Condition};
use crate::error::{domain, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub pi0: f64,
    pub theta_alt: f64,
    pub n_features: usize,
    pub n_cancer_a: usize,
    pub n_cancer_b: usize,
    pub n_healthy: usize,
    /// Within-group standard deviation on the log scale.
    pub sigma: f64,
    /// Feature baseline log-abundances are uniform on this range.
    pub log_mean_range: (f64, f64),
    /// Probability that a value is missing.
    pub missing_rate: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            pi0: 0.5,
            theta_alt: 3.0,
            n_features: 20,
            n_cancer_a: 55,
            n_cancer_b: 35,
            n_healthy: 64,
            sigma: 0.5,
            log_mean_range: (8.0, 10.0),
            missing_rate: 0.0,
            seed: 1,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.pi0) {
            return domain("pi0 must lie in [0, 1]");
        }
        if !(self.theta_alt.is_finite() && self.theta_alt >= 0.0) {
            return domain("theta_alt must be finite and nonnegative");
        }
        if self.n_features == 0 {
            return domain("n_features must be positive");
        }
        if self.n_healthy < 2 || (self.n_cancer_a < 2 && self.n_cancer_b < 2) {
            return domain("need at least 2 healthy samples and 2 samples in some cancer group");
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return domain("sigma must be positive");
        }
        let (lo, hi) = self.log_mean_range;
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return domain("log_mean_range must be a finite, ordered pair");
        }
        if !(0.0..1.0).contains(&self.missing_rate) {
            return domain("missing_rate must lie in [0, 1)");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    pub table: AbundanceTable,
    /// Whether each feature was drawn from the alternative.
    pub alternative: Vec<bool>,
}

/// Draws a table on the raw scale: a log-abundance `y` is stored as
/// `exp(y) - 1`, so the shift-log transform returns `y` when every stored
/// value is nonnegative.
pub fn generate_synthetic(cfg: &SynthConfig) -> Result<SyntheticData> {
    cfg.validate()?;
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    let n_alt = ((1.0 - cfg.pi0) * cfg.n_features as f64).round() as usize;
    let mut alternative: Vec<bool> = (0..cfg.n_features).map(|i| i < n_alt).collect();
    alternative.shuffle(&mut rng);

    let mut labels = Vec::new();
    let mut sample_ids = Vec::new();
    for (cond, n, prefix) in [
        (Condition::CancerA, cfg.n_cancer_a, "A"),
        (Condition::CancerB, cfg.n_cancer_b, "B"),
        (Condition::Healthy, cfg.n_healthy, "H"),
    ] {
        for i in 0..n {
            labels.push(cond);
            sample_ids.push(format!("{prefix}{:03}", i + 1));
        }
    }
    let noise = Normal::new(0.0, cfg.sigma).expect("validated sigma");
    let (lo, hi) = cfg.log_mean_range;
    let mut values = Vec::with_capacity(cfg.n_features);
    let mut feature_ids = Vec::with_capacity(cfg.n_features);
    for (f, &alt) in alternative.iter().enumerate() {
        feature_ids.push(format!("protein_{:03}", f + 1));
        let base = lo + (hi - lo) * rng.random::<f64>();
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        let shift = |n_cancer: usize| {
            if alt && n_cancer > 0 {
                sign * cfg.theta_alt * cfg.sigma * (1.0 / n_cancer as f64 + 1.0 / cfg.n_healthy as f64).sqrt()
            } else {
                0.0
            }
        };
        let (shift_a, shift_b) = (shift(cfg.n_cancer_a), shift(cfg.n_cancer_b));
        let row = labels
            .iter()
            .map(|l| {
                let mean = match l {
                    Condition::CancerA => base + shift_a,
                    Condition::CancerB => base + shift_b,
                    Condition::Healthy => base,
                };
                let y = mean + noise.sample(&mut rng);
                let missing = cfg.missing_rate > 0.0 && rng.random::<f64>() < cfg.missing_rate;
                (!missing).then(|| y.exp_m1())
            })
            .collect();
        values.push(row);
    }
    Ok(SyntheticData {
        table: AbundanceTable::new(feature_ids, sample_ids, labels, values)?,
        alternative,
    })
}
