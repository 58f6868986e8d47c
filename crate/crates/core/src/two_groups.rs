//! Two-groups benchmark: `pi0 g0 + (1 - pi0) g(.|theta_alt)` fitted to all
//! features by maximum likelihood, and the support and posterior
//! probabilities it implies.

use rayon::prelude::*;
use serde::Serialize;

use crate::distributions::log_add_exp;
use crate::error::{domain, Error, Result};
use crate::family::SamplingFamily;
use crate::optimize::nelder_mead_box;
use crate::quadrature::KahanSum;
use crate::support::SupportValue;

const PI0_GRID: usize = 21;
const THETA_GRID: usize = 121;
const THETA_MARGIN: f64 = 10.0;
const F_TOL: f64 = 1e-8;
const MAX_ITER: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TwoGroupsFit {
    pub pi0_hat: f64,
    pub theta_alt_hat: f64,
    pub log_likelihood: f64,
    pub n_features: usize,
    pub converged: bool,
    /// Set for a single feature, where the fit is barely identified.
    pub weakly_identified: bool,
    /// Best log-likelihood found on the coarse grid.
    pub grid_log_likelihood: f64,
}

struct Feature<'a> {
    family: &'a dyn SamplingFamily,
    t: f64,
    ln_null: f64,
}

fn log_likelihood(features: &[Feature<'_>], pi0: f64, theta: f64) -> f64 {
    let ln_alt: Vec<f64> = features
        .par_iter()
        .map(|f| f.family.log_density(f.t, theta))
        .collect();
    mixture_sum(features, &ln_alt, pi0)
}

fn mixture_sum(features: &[Feature<'_>], ln_alt: &[f64], pi0: f64) -> f64 {
    let (a, b) = (pi0.ln(), (1.0 - pi0).ln());
    let mut sum = KahanSum::default();
    for (f, la) in features.iter().zip(ln_alt) {
        let term = log_add_exp(a + f.ln_null, b + la);
        if term.is_nan() {
            return f64::NAN;
        }
        sum.add(term);
    }
    sum.value()
}

/// Maximum-likelihood fit of the two-groups model with one family for all
/// statistics.
pub fn fit_mixture(fam: &dyn SamplingFamily, stats: &[f64]) -> Result<TwoGroupsFit> {
    let items: Vec<(&dyn SamplingFamily, f64)> = stats.iter().map(|&t| (fam, t)).collect();
    fit_mixture_heterogeneous(&items)
}

/// As [`fit_mixture`], with each statistic carrying its own family (for
/// example, its own degrees of freedom). All families must share the
/// parameter space of the first one.
pub fn fit_mixture_heterogeneous(items: &[(&dyn SamplingFamily, f64)]) -> Result<TwoGroupsFit> {
    if items.is_empty() {
        return domain("cannot fit a mixture to zero statistics");
    }
    let space = items[0].0.theta_space();
    let mut features = Vec::with_capacity(items.len());
    for &(family, t) in items {
        if !family.statistic_space().contains(t) {
            return domain(format!("statistic {t} outside the statistic space of {}", family.name()));
        }
        if family.theta_space() != space {
            return domain("all families in a mixture fit must share a parameter space");
        }
        let ln_null = family.log_density(t, family.null_theta());
        if ln_null.is_nan() {
            return Err(Error::Numerical(format!("null density undefined at t = {t}")));
        }
        features.push(Feature { family, t, ln_null });
    }
    // fixed order makes the fit independent of input order
    features.sort_by(|a, b| {
        a.t.total_cmp(&b.t)
            .then_with(|| a.family.name().cmp(&b.family.name()))
    });

    let max_t = features.iter().map(|f| f.t.abs()).fold(0.0, f64::max);
    let theta_lo = space.lo.max(-(max_t + THETA_MARGIN));
    let theta_hi = space.hi.min(max_t + THETA_MARGIN).max(theta_lo);
    let theta_grid: Vec<f64> = (0..THETA_GRID)
        .map(|i| theta_lo + (theta_hi - theta_lo) * i as f64 / (THETA_GRID - 1) as f64)
        .collect();

    // grid scan, pi0 = 1 first so that ties favour the null face
    let mut grid_best = (f64::NEG_INFINITY, 1.0, theta_grid[0]);
    for &theta in &theta_grid {
        let ln_alt: Vec<f64> = features
            .par_iter()
            .map(|f| f.family.log_density(f.t, theta))
            .collect();
        for i in (0..PI0_GRID).rev() {
            let pi0 = i as f64 / (PI0_GRID - 1) as f64;
            let ll = mixture_sum(&features, &ln_alt, pi0);
            if ll > grid_best.0 {
                grid_best = (ll, pi0, theta);
            }
        }
    }
    if !grid_best.0.is_finite() {
        return Err(Error::Numerical("mixture log-likelihood is not finite anywhere on the grid".into()));
    }

    let objective = |p: [f64; 2]| log_likelihood(&features, p[0], p[1]);
    let step = [0.05, ((theta_hi - theta_lo) / (THETA_GRID - 1) as f64).max(1e-3)];
    let lo = [0.0, theta_lo];
    let hi = [1.0, theta_hi];
    let starts = [
        [grid_best.1, grid_best.2],
        [0.0, theta_lo],
        [0.0, theta_hi],
        [1.0, theta_lo],
        [1.0, theta_hi],
    ];
    let mut best = (grid_best.0, [grid_best.1, grid_best.2], false);
    for start in starts {
        let r = nelder_mead_box(objective, start, step, lo, hi, F_TOL, MAX_ITER);
        if r.value > best.0 || (r.value == best.0 && r.converged && !best.2) {
            best = (r.value, r.argmax, r.converged);
        }
    }
    // the null-only model is identified up to theta; report it when it
    // attains the maximum within tolerance
    let mut null_ll = KahanSum::default();
    for f in &features {
        null_ll.add(f.ln_null);
    }
    let null_ll = null_ll.value();
    if null_ll >= best.0 - F_TOL {
        best = (best.0.max(null_ll), [1.0, best.1[1]], true);
    }
    Ok(TwoGroupsFit {
        pi0_hat: best.1[0],
        theta_alt_hat: best.1[1],
        log_likelihood: best.0,
        n_features: features.len(),
        converged: best.2,
        weakly_identified: features.len() == 1,
        grid_log_likelihood: grid_best.0,
    })
}

/// `ln g(t | theta_alt_hat) - ln g0(t)`.
pub fn simultaneous_support(fit: &TwoGroupsFit, fam: &dyn SamplingFamily, t: f64) -> Result<SupportValue> {
    if !fam.statistic_space().contains(t) {
        return domain(format!("statistic {t} outside the statistic space"));
    }
    let alt = fam.log_density(t, fit.theta_alt_hat);
    let null = fam.log_density(t, fam.null_theta());
    if alt.is_nan() || null.is_nan() {
        return Err(Error::Numerical(format!("density undefined at t = {t}")));
    }
    Ok(match (alt == f64::NEG_INFINITY, null == f64::NEG_INFINITY) {
        (true, true) => SupportValue::Undefined,
        (false, true) => SupportValue::Infinite,
        _ => SupportValue::Finite(alt - null),
    })
}

/// Fitted posterior probability of the alternative, or `None` when both
/// component densities vanish.
pub fn posterior_probability(fit: &TwoGroupsFit, fam: &dyn SamplingFamily, t: f64) -> Result<Option<f64>> {
    if !fam.statistic_space().contains(t) {
        return domain(format!("statistic {t} outside the statistic space"));
    }
    let (pi0, pi1) = (fit.pi0_hat, 1.0 - fit.pi0_hat);
    if pi1 == 0.0 {
        return Ok(Some(0.0));
    }
    if pi0 == 0.0 {
        return Ok(Some(1.0));
    }
    let a = pi1.ln() + fam.log_density(t, fit.theta_alt_hat);
    let b = pi0.ln() + fam.log_density(t, fam.null_theta());
    if a.is_nan() || b.is_nan() {
        return Err(Error::Numerical(format!("density undefined at t = {t}")));
    }
    if a == f64::NEG_INFINITY && b == f64::NEG_INFINITY {
        return Ok(None);
    }
    // logistic of the posterior log-odds
    let z = a - b;
    Ok(Some(if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::DegreesOfFreedom;
    use crate::family::FoldedNctFamily;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn fam() -> FoldedNctFamily {
        FoldedNctFamily::new(DegreesOfFreedom::new(117.0).unwrap())
    }

    fn draws(theta: f64, n: usize, seed: u64) -> Vec<f64> {
        let f = fam();
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        (0..n).map(|_| f.sample(theta, &mut rng)).collect()
    }

    #[test]
    fn pure_alternative_is_recovered() {
        let fit = fit_mixture(&fam(), &draws(3.0, 200, 11)).unwrap();
        assert!(fit.pi0_hat <= 0.1, "{fit:?}");
        assert!((fit.theta_alt_hat - 3.0).abs() <= 0.3, "{fit:?}");
        assert!(fit.log_likelihood >= fit.grid_log_likelihood);
    }

    #[test]
    fn single_null_mode_statistic_sits_on_null_face() {
        let f = fam();
        let fit = fit_mixture(&f, &[0.0]).unwrap();
        assert!(fit.weakly_identified);
        let at_null = f.log_density(0.0, 0.0);
        assert!((fit.log_likelihood - at_null).abs() < 1e-12);
    }

    #[test]
    fn empty_input_is_rejected() {
        assert!(fit_mixture(&fam(), &[]).is_err());
    }

    #[test]
    fn extreme_pi0_posteriors() {
        let f = fam();
        let mut fit = fit_mixture(&f, &[1.0, 2.0]).unwrap();
        fit.pi0_hat = 1.0;
        assert_eq!(posterior_probability(&fit, &f, 3.0).unwrap(), Some(0.0));
        fit.pi0_hat = 0.0;
        assert_eq!(posterior_probability(&fit, &f, 3.0).unwrap(), Some(1.0));
    }
}
