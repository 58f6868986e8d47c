//! Universal densities on the statistic space: normalized maximum
//! likelihood, normalized maximum weighted likelihood, and mixtures over a
//! discrete prior (including the capacity-achieving prior).

mod capacity;

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::family::{self, Estimate, LogDensity, SamplingFamily};
use crate::quadrature::{self, QuadratureSpec};

pub use capacity::{capacity_mixture, capacity_prior, capacity_prior_from, CapacityResult, NEGLIGIBLE_MASS};

/// Relative size below which the integrand's tail is dropped.
const TAIL_NEGLIGIBLE: f64 = 1e-14;
const TAIL_GROWTH: f64 = 1.25;
const TAIL_LIMIT_FACTOR: f64 = 64.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DensityKind {
    Nml,
    Nmwl,
    PriorMixture,
    CapacityMixture,
}

/// Probability masses on a strictly increasing grid of parameter values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscretePrior {
    support_points: Vec<f64>,
    masses: Vec<f64>,
}

impl DiscretePrior {
    pub fn new(support_points: Vec<f64>, masses: Vec<f64>) -> Result<Self> {
        if support_points.is_empty() || support_points.len() != masses.len() {
            return domain("prior needs equally many (>= 1) support points and masses");
        }
        if support_points.windows(2).any(|w| !(w[1] > w[0])) {
            return domain("prior support points must be strictly increasing");
        }
        if masses.iter().any(|&m| !(m >= 0.0) || !m.is_finite()) {
            return domain("prior masses must be nonnegative");
        }
        let total: f64 = masses.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return domain(format!("prior masses must sum to 1, got {total}"));
        }
        Ok(Self {
            support_points,
            masses,
        })
    }

    pub fn point_mass(theta: f64) -> Self {
        Self {
            support_points: vec![theta],
            masses: vec![1.0],
        }
    }

    pub fn uniform(support_points: Vec<f64>) -> Result<Self> {
        let n = support_points.len();
        Self::new(support_points, vec![1.0 / n as f64; n])
    }

    /// Renormalizes `weights` before validating.
    pub fn from_weights(support_points: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return domain("prior weights must have positive total");
        }
        Self::new(support_points, weights.into_iter().map(|w| w / total).collect())
    }

    pub fn support_points(&self) -> &[f64] {
        &self.support_points
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.support_points.iter().copied().zip(self.masses.iter().copied())
    }
}

#[derive(Debug, Clone)]
enum Construction {
    Nml,
    Nmwl { t0: f64, w0: f64 },
    Mixture { prior: DiscretePrior },
}

/// A normalized density `g*` on the statistic space together with the log of
/// its normalizing constant.
#[derive(Debug, Clone)]
pub struct UniversalDensity {
    kind: DensityKind,
    family: Arc<dyn SamplingFamily>,
    construction: Construction,
    log_z: f64,
    domain: (f64, f64),
}

impl UniversalDensity {
    pub fn kind(&self) -> DensityKind {
        self.kind
    }

    pub fn family(&self) -> &Arc<dyn SamplingFamily> {
        &self.family
    }

    /// `ln Z` (NML), `ln Z-bar` (NMWL), or 0 for mixtures.
    pub fn log_z(&self) -> f64 {
        self.log_z
    }

    /// Interval the normalizer was integrated over.
    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }

    /// Pseudo-observation and its weight, for NMWL densities.
    pub fn pseudo_observation(&self) -> Option<(f64, f64)> {
        match self.construction {
            Construction::Nmwl { t0, w0 } => Some((t0, w0)),
            _ => None,
        }
    }

    pub fn prior(&self) -> Option<&DiscretePrior> {
        match &self.construction {
            Construction::Mixture { prior } => Some(prior),
            _ => None,
        }
    }

    /// The maximizer behind the density value at `t`: `theta_hat(t)` for
    /// NML, `theta_bar(t)` for NMWL, none for mixtures.
    pub fn estimate(&self, t: f64) -> Result<Option<Estimate>> {
        match self.construction {
            Construction::Nml => family::mle(self.family.as_ref(), t).map(Some),
            Construction::Nmwl { t0, w0 } => {
                family::mwle_pseudo(self.family.as_ref(), t0, w0, t).map(Some)
            }
            Construction::Mixture { .. } => Ok(None),
        }
    }

    /// Log of the unnormalized density (maximized likelihood, maximized
    /// weighted likelihood, or the mixture itself).
    pub fn log_unnormalized(&self, t: f64) -> Result<f64> {
        if !self.family.statistic_space().contains(t) {
            return domain(format!("statistic {t} outside the statistic space"));
        }
        match &self.construction {
            Construction::Nml | Construction::Nmwl { .. } => {
                Ok(self.estimate(t)?.expect("maximizer").log_value)
            }
            Construction::Mixture { prior } => Ok(mixture_ln(self.family.as_ref(), prior, t)),
        }
    }

    pub fn log_density(&self, t: f64) -> Result<f64> {
        Ok(self.log_unnormalized(t)? - self.log_z)
    }

    pub fn density(&self, t: f64) -> Result<f64> {
        self.log_density(t).map(f64::exp)
    }

    /// Integral of the density over its domain, by `q`'s cross-check rule.
    pub fn normalization(&self, q: &QuadratureSpec) -> Result<f64> {
        let (a, b) = self.domain;
        let shift = self.log_z;
        let r = quadrature::integrate(
            |t| (self.log_unnormalized(t).unwrap_or(f64::NAN) - shift).exp(),
            a,
            b,
            &q.cross_check(),
        )?;
        Ok(r.value)
    }

    /// Log density sampled on `points` equally spaced nodes of the domain,
    /// interpolated with four-point Lagrange polynomials.
    pub fn tabulate(&self, points: usize) -> Result<TabulatedDensity> {
        let points = points.max(8);
        let (a, b) = self.domain;
        let h = (b - a) / (points - 1) as f64;
        let values: Vec<Result<f64>> = (0..points)
            .into_par_iter()
            .map(|i| self.log_density(if i + 1 == points { b } else { a + i as f64 * h }))
            .collect();
        let values = values.into_iter().collect::<Result<Vec<f64>>>()?;
        Ok(TabulatedDensity {
            inner: self.clone(),
            lo: a,
            step: h,
            values,
        })
    }
}

impl LogDensity for UniversalDensity {
    /// `-inf` outside the statistic space, where the density is zero.
    fn ln_pdf(&self, t: f64) -> f64 {
        if !t.is_nan() && !self.family.statistic_space().contains(t) {
            return f64::NEG_INFINITY;
        }
        self.log_density(t).unwrap_or(f64::NAN)
    }

    fn domain(&self) -> (f64, f64) {
        self.domain
    }
}

/// Fast approximate evaluation of a universal density (exact outside the
/// tabulated interval).
#[derive(Debug, Clone)]
pub struct TabulatedDensity {
    inner: UniversalDensity,
    lo: f64,
    step: f64,
    values: Vec<f64>,
}

impl TabulatedDensity {
    pub fn log_density(&self, t: f64) -> f64 {
        let n = self.values.len();
        let x = (t - self.lo) / self.step;
        if !(x >= 0.0) || x > (n - 1) as f64 {
            return self.inner.ln_pdf(t);
        }
        let i = (x.floor() as usize).clamp(1, n - 3);
        let u = x - i as f64;
        let (p0, p1, p2, p3) = (
            self.values[i - 1],
            self.values[i],
            self.values[i + 1],
            self.values[i + 2],
        );
        // nodes at -1, 0, 1, 2
        -u * (u - 1.0) * (u - 2.0) / 6.0 * p0 + (u + 1.0) * (u - 1.0) * (u - 2.0) / 2.0 * p1
            - (u + 1.0) * u * (u - 2.0) / 2.0 * p2
            + (u + 1.0) * u * (u - 1.0) / 6.0 * p3
    }

    pub fn inner(&self) -> &UniversalDensity {
        &self.inner
    }
}

impl LogDensity for TabulatedDensity {
    fn ln_pdf(&self, t: f64) -> f64 {
        self.log_density(t)
    }

    fn domain(&self) -> (f64, f64) {
        self.inner.domain
    }
}

fn mixture_ln(fam: &dyn SamplingFamily, prior: &DiscretePrior, t: f64) -> f64 {
    let terms: Vec<f64> = prior
        .iter()
        .filter(|&(_, m)| m > 0.0)
        .map(|(theta, m)| m.ln() + fam.log_density(t, theta))
        .collect();
    log_sum_exp(&terms)
}

pub(crate) fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY || m.is_nan() {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Finite integration interval for the normalizer of `ln_integrand`,
/// probing the tail for non-integrability first.
fn integration_domain<F>(ln_integrand: &F, fam: &dyn SamplingFamily, q: &QuadratureSpec) -> Result<(f64, f64)>
where
    F: Fn(f64) -> f64,
{
    let space = fam.statistic_space();
    let lo_seed = if space.lo.is_finite() { space.lo } else { -q.t_max };
    q.validate(lo_seed)?;
    let hi_seed = if space.hi.is_finite() { space.hi } else { q.t_max };

    if !space.hi.is_finite() && q.divergence_probe {
        probe_tail(ln_integrand, fam, q.t_max, 2.0 * q.t_max, q.abs_tol)?;
    }
    if !space.lo.is_finite() && q.divergence_probe {
        probe_tail(ln_integrand, fam, -q.t_max, -2.0 * q.t_max, q.abs_tol)?;
    }

    let scan = 33;
    let mut peak = f64::NEG_INFINITY;
    for i in 0..scan {
        let t = lo_seed + (hi_seed - lo_seed) * i as f64 / (scan - 1) as f64;
        let v = ln_integrand(t);
        if v.is_nan() {
            return Err(Error::Numerical(format!("integrand is NaN at t = {t}")));
        }
        peak = peak.max(v);
    }
    let negligible = peak + TAIL_NEGLIGIBLE.ln();
    let extend = |mut edge: f64, limit: f64| {
        while ln_integrand(edge) > negligible && edge.abs() < limit.abs() {
            edge = (edge * TAIL_GROWTH).clamp(-limit.abs(), limit.abs());
        }
        edge
    };
    let hi = if space.hi.is_finite() || !q.extend_tail {
        hi_seed
    } else {
        extend(hi_seed, TAIL_LIMIT_FACTOR * q.t_max)
    };
    let lo = if space.lo.is_finite() || !q.extend_tail {
        lo_seed
    } else {
        extend(lo_seed, TAIL_LIMIT_FACTOR * q.t_max)
    };
    Ok((lo, hi))
}

/// Flags an integrand whose tail decays no faster than `1/|t|` between
/// `t1` and `t2 = 2 t1` (this includes the flat case of values within 10%).
fn probe_tail<F>(ln_integrand: &F, fam: &dyn SamplingFamily, t1: f64, t2: f64, abs_tol: f64) -> Result<()>
where
    F: Fn(f64) -> f64,
{
    let f1 = ln_integrand(t1).exp();
    let f2 = ln_integrand(t2).exp();
    let slow = (t2 * f2).abs() >= 0.9 * (t1 * f1).abs();
    if f2 > abs_tol && slow {
        return Err(Error::NonIntegrable {
            family: fam.name(),
            t_low: t1,
            tail_low: f1,
            t_high: t2,
            tail_high: f2,
        });
    }
    Ok(())
}

fn normalize<F>(ln_integrand: F, fam: &dyn SamplingFamily, q: &QuadratureSpec) -> Result<(f64, (f64, f64))>
where
    F: Fn(f64) -> f64 + Sync,
{
    let (a, b) = integration_domain(&ln_integrand, fam, q)?;
    // scale by the value at a few points to keep exp() in range
    let shift = [a, 0.5 * (a + b), b]
        .iter()
        .map(|&t| ln_integrand(t))
        .fold(f64::NEG_INFINITY, f64::max);
    let shift = if shift.is_finite() { shift } else { 0.0 };
    let r = quadrature::integrate(|t| (ln_integrand(t) - shift).exp(), a, b, q)?;
    if !(r.value > 0.0) {
        return Err(Error::Quadrature(format!(
            "normalizer of {} is {} on [{a}, {b}]",
            fam.name(),
            r.value
        )));
    }
    Ok((shift + r.value.ln(), (a, b)))
}

/// Normalized maximum likelihood `g(t; theta_hat(t)) / Z`.
pub fn nml_density(fam: Arc<dyn SamplingFamily>, q: &QuadratureSpec) -> Result<UniversalDensity> {
    let f = fam.as_ref();
    let ln_integrand = |t: f64| family::mle(f, t).map(|e| e.log_value).unwrap_or(f64::NAN);
    let (log_z, domain) = normalize(ln_integrand, f, q)?;
    Ok(UniversalDensity {
        kind: DensityKind::Nml,
        family: fam,
        construction: Construction::Nml,
        log_z,
        domain,
    })
}

/// Pseudo-observation weight `1/(n_eff + 1)`.
pub fn single_observation_weight(n_eff: u32) -> f64 {
    1.0 / (n_eff as f64 + 1.0)
}

/// Normalized maximum weighted likelihood with the focus statistic weighted
/// `1 - 1/(n_eff+1)` and the pseudo-observation `t0` weighted `1/(n_eff+1)`.
pub fn nmwl_density(
    fam: Arc<dyn SamplingFamily>,
    t0: f64,
    n_eff: u32,
    q: &QuadratureSpec,
) -> Result<UniversalDensity> {
    if n_eff == 0 {
        return domain("n_eff must be a positive integer");
    }
    nmwl_density_weighted(fam, t0, single_observation_weight(n_eff), q)
}

/// NMWL with an explicit pseudo-observation weight `w0` in `[0, 1/2]`.
pub fn nmwl_density_weighted(
    fam: Arc<dyn SamplingFamily>,
    t0: f64,
    w0: f64,
    q: &QuadratureSpec,
) -> Result<UniversalDensity> {
    if !fam.statistic_space().contains(t0) {
        return domain(format!("pseudo-observation {t0} outside the statistic space"));
    }
    if !(0.0..=0.5).contains(&w0) {
        return domain(format!("pseudo-observation weight must lie in [0, 1/2], got {w0}"));
    }
    let f = fam.as_ref();
    let ln_integrand =
        |t: f64| family::mwle_pseudo(f, t0, w0, t).map(|e| e.log_value).unwrap_or(f64::NAN);
    let (log_z, domain) = normalize(ln_integrand, f, q)?;
    Ok(UniversalDensity {
        kind: DensityKind::Nmwl,
        family: fam,
        construction: Construction::Nmwl { t0, w0 },
        log_z,
        domain,
    })
}

fn mixture_domain(fam: &dyn SamplingFamily, prior: &DiscretePrior) -> (f64, f64) {
    prior.support_points().iter().fold(
        (f64::INFINITY, f64::NEG_INFINITY),
        |(lo, hi), &theta| {
            let (a, b) = fam.member_domain(theta);
            (lo.min(a), hi.max(b))
        },
    )
}

/// `t -> sum_k mass_k g(t | theta_k)`.
pub fn prior_mixture_density(
    fam: Arc<dyn SamplingFamily>,
    prior: DiscretePrior,
    q: &QuadratureSpec,
) -> Result<UniversalDensity> {
    let space = fam.theta_space();
    if let Some(&bad) = prior.support_points().iter().find(|&&p| !space.contains(p)) {
        return domain(format!("prior support point {bad} outside the parameter space"));
    }
    q.validate(fam.statistic_space().lo.max(-q.t_max))?;
    let domain = mixture_domain(fam.as_ref(), &prior);
    Ok(UniversalDensity {
        kind: DensityKind::PriorMixture,
        family: fam,
        construction: Construction::Mixture { prior },
        log_z: 0.0,
        domain,
    })
}

/// `D(g(.|theta_k) || gstar)` for every support point of `prior`.
pub fn average_redundancy(
    fam: &Arc<dyn SamplingFamily>,
    prior: &DiscretePrior,
    gstar: &dyn LogDensity,
    q: &QuadratureSpec,
) -> Result<Vec<f64>> {
    prior
        .support_points()
        .iter()
        .map(|&theta| {
            let member = family::Member::new(fam.clone(), theta)?;
            match crate::validation::kl_divergence(&member, gstar, q)? {
                crate::validation::Divergence::Finite(d) => Ok(d),
                crate::validation::Divergence::Infinite => Err(Error::Numerical(format!(
                    "infinite redundancy at theta = {theta}"
                ))),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::DegreesOfFreedom;
    use crate::family::{FoldedNctFamily, Interval, NormalLocationFamily};

    fn normal_box() -> Arc<dyn SamplingFamily> {
        Arc::new(
            NormalLocationFamily::new(
                1.0,
                Interval::new(-10.0, 10.0).unwrap(),
                Interval::new(-5.0, 5.0).unwrap(),
            )
            .unwrap(),
        )
    }

    fn nct(nu: f64) -> Arc<dyn SamplingFamily> {
        Arc::new(FoldedNctFamily::new(DegreesOfFreedom::new(nu).unwrap()))
    }

    #[test]
    fn nml_of_normal_location_is_uniform() {
        let g = nml_density(normal_box(), &QuadratureSpec::default()).unwrap();
        let expect = (10.0 / (2.0 * std::f64::consts::PI).sqrt()).ln();
        assert!((g.log_z() - expect).abs() < 1e-9, "{}", g.log_z());
        for &t in &[-4.0, 0.0, 2.2] {
            assert!((g.density(t).unwrap() - 0.1).abs() < 1e-9);
        }
    }

    #[test]
    fn nml_of_untruncated_folded_t_is_not_integrable() {
        let r = nml_density(nct(117.0), &QuadratureSpec::default());
        assert!(matches!(r, Err(Error::NonIntegrable { .. })), "{r:?}");
    }

    #[test]
    fn nmwl_of_untruncated_folded_t_is_integrable() {
        let g = nmwl_density(nct(117.0), 0.0, 119, &QuadratureSpec::default()).unwrap();
        assert!(g.log_z().is_finite() && g.log_z() > 0.0);
        let n = g.normalization(&QuadratureSpec::default()).unwrap();
        assert!((n - 1.0).abs() < 1e-4, "{n}");
    }

    #[test]
    fn nmwl_half_weight_normal_closed_form() {
        // theta_bar = t/2 and the maximized weighted likelihood is phi(t/2)
        let g = nmwl_density(normal_box(), 0.0, 1, &QuadratureSpec::default()).unwrap();
        let phi = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
        for &t in &[-3.0, 1.0, 4.0] {
            let e = g.estimate(t).unwrap().unwrap();
            assert!((e.theta - t / 2.0).abs() < 1e-8);
            assert!((g.log_unnormalized(t).unwrap() - phi(t / 2.0).ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_pseudo_weight_degenerates_to_nml() {
        let q = QuadratureSpec::default();
        let a = nmwl_density_weighted(normal_box(), 0.0, 0.0, &q).unwrap();
        let b = nml_density(normal_box(), &q).unwrap();
        for &t in &[-4.5, -1.0, 0.3, 3.9] {
            assert!((a.density(t).unwrap() - b.density(t).unwrap()).abs() < 1e-6);
        }
    }

    #[test]
    fn point_mass_mixture_is_the_member() {
        let fam = nct(30.0);
        let g = prior_mixture_density(fam.clone(), DiscretePrior::point_mass(1.7), &QuadratureSpec::default())
            .unwrap();
        for &t in &[0.0, 1.0, 2.5] {
            assert!((g.log_density(t).unwrap() - fam.log_density(t, 1.7)).abs() < 1e-14);
        }
        assert_eq!(g.log_z(), 0.0);
    }

    #[test]
    fn two_point_mixture_is_the_average() {
        let fam = nct(30.0);
        let prior = DiscretePrior::new(vec![0.0, 2.0], vec![0.5, 0.5]).unwrap();
        let g = prior_mixture_density(fam.clone(), prior, &QuadratureSpec::default()).unwrap();
        for &t in &[0.2, 1.0, 3.0] {
            let avg = 0.5 * (fam.log_density(t, 0.0).exp() + fam.log_density(t, 2.0).exp());
            assert!((g.density(t).unwrap() - avg).abs() < 1e-14);
        }
    }

    #[test]
    fn discrete_prior_validation() {
        assert!(DiscretePrior::new(vec![0.0, 0.0], vec![0.5, 0.5]).is_err());
        assert!(DiscretePrior::new(vec![0.0, 1.0], vec![0.5, 0.6]).is_err());
        assert!(DiscretePrior::new(vec![0.0, 1.0], vec![-0.5, 1.5]).is_err());
        assert!(DiscretePrior::new(vec![], vec![]).is_err());
        let u = DiscretePrior::uniform((0..7).map(|i| i as f64).collect()).unwrap();
        assert!((u.masses().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn tabulated_matches_exact() {
        let g = nmwl_density(nct(17.0), 0.0, 19, &QuadratureSpec::default()).unwrap();
        let tab = g.tabulate(4001).unwrap();
        for &t in &[0.05, 0.8, 2.3, 5.5, 11.1] {
            let a = tab.log_density(t);
            let b = g.log_density(t).unwrap();
            assert!((a - b).abs() < 1e-5, "{t}: {a} vs {b}");
        }
    }

    #[test]
    fn pseudo_observation_outside_space_is_rejected() {
        assert!(nmwl_density(nct(10.0), -1.0, 5, &QuadratureSpec::default()).is_err());
        assert!(nmwl_density(nct(10.0), 0.0, 0, &QuadratureSpec::default()).is_err());
    }
}
