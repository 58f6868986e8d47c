//! One-parameter sampling families on a statistic space, together with the
//! maximum-likelihood and maximum-weighted-likelihood solvers.

use std::fmt;
use std::sync::Arc;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::distributions::{DegreesOfFreedom, FoldedNoncentralT, NctKernel};
use crate::error::{domain, Error, Result};
use crate::optimize::{self, Boundary};

/// Default upper end of the truncated parameter space `[0, inf)`.
pub const DEFAULT_THETA_CAP: f64 = 50.0;
/// Distance above a member's parameter beyond which its folded-t tail is
/// treated as zero.
pub const TAIL_WIDTH: f64 = 40.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if lo.is_nan() || hi.is_nan() || lo > hi {
            return domain(format!("invalid interval [{lo}, {hi}]"));
        }
        Ok(Self { lo, hi })
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }

    pub fn is_bounded(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite()
    }
}

/// A family `{ g(.|theta) : theta in Theta }` of densities of a statistic.
pub trait SamplingFamily: Send + Sync + fmt::Debug {
    fn name(&self) -> String;

    /// `ln g(t | theta)`. NaN signals a numerical failure.
    fn log_density(&self, t: f64, theta: f64) -> f64;

    fn theta_space(&self) -> Interval;

    fn statistic_space(&self) -> Interval;

    fn null_theta(&self) -> f64;

    /// Finite interval carrying all but a negligible part of `g(.|theta)`.
    fn member_domain(&self, theta: f64) -> (f64, f64);

    fn sample(&self, theta: f64, rng: &mut dyn RngCore) -> f64;
}

/// Something that can be integrated: a log density with a finite effective
/// domain.
pub trait LogDensity: Send + Sync {
    fn ln_pdf(&self, t: f64) -> f64;
    fn domain(&self) -> (f64, f64);
}

impl<T: LogDensity + ?Sized> LogDensity for &T {
    fn ln_pdf(&self, t: f64) -> f64 {
        (**self).ln_pdf(t)
    }
    fn domain(&self) -> (f64, f64) {
        (**self).domain()
    }
}

impl<T: LogDensity + ?Sized> LogDensity for Arc<T> {
    fn ln_pdf(&self, t: f64) -> f64 {
        (**self).ln_pdf(t)
    }
    fn domain(&self) -> (f64, f64) {
        (**self).domain()
    }
}

/// `g(.|theta)` for a fixed member of a family.
#[derive(Debug, Clone)]
pub struct Member {
    family: Arc<dyn SamplingFamily>,
    theta: f64,
}

impl Member {
    pub fn new(family: Arc<dyn SamplingFamily>, theta: f64) -> Result<Self> {
        if !family.theta_space().contains(theta) {
            return domain(format!("theta = {theta} outside the parameter space of {}", family.name()));
        }
        Ok(Self { family, theta })
    }

    pub fn null(family: Arc<dyn SamplingFamily>) -> Self {
        let theta = family.null_theta();
        Self { family, theta }
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn family(&self) -> &Arc<dyn SamplingFamily> {
        &self.family
    }
}

impl LogDensity for Member {
    fn ln_pdf(&self, t: f64) -> f64 {
        self.family.log_density(t, self.theta)
    }
    fn domain(&self) -> (f64, f64) {
        self.family.member_domain(self.theta)
    }
}

/// Absolute two-sample t statistic: `g(t | theta)` is the folded noncentral
/// t density with noncentrality `theta = |delta|`.
#[derive(Debug, Clone)]
pub struct FoldedNctFamily {
    df: DegreesOfFreedom,
    kernel: NctKernel,
    theta_cap: f64,
    t_hi: f64,
}

impl FoldedNctFamily {
    pub fn new(df: DegreesOfFreedom) -> Self {
        Self {
            df,
            kernel: NctKernel::new(df.value()),
            theta_cap: DEFAULT_THETA_CAP,
            t_hi: f64::INFINITY,
        }
    }

    pub fn with_theta_cap(mut self, cap: f64) -> Result<Self> {
        if !(cap.is_finite() && cap > 0.0) {
            return domain(format!("theta cap must be positive and finite, got {cap}"));
        }
        self.theta_cap = cap;
        Ok(self)
    }

    /// Restrict the statistic space to `[0, t_hi]`.
    pub fn truncated(mut self, t_hi: f64) -> Result<Self> {
        if !(t_hi > 0.0) {
            return domain(format!("truncation point must be positive, got {t_hi}"));
        }
        self.t_hi = t_hi;
        Ok(self)
    }

    pub fn df(&self) -> DegreesOfFreedom {
        self.df
    }

    pub fn theta_cap(&self) -> f64 {
        self.theta_cap
    }

    pub fn member(&self, theta: f64) -> Result<FoldedNoncentralT> {
        FoldedNoncentralT::new(theta, self.df)
    }
}

impl SamplingFamily for FoldedNctFamily {
    fn name(&self) -> String {
        if self.t_hi.is_finite() {
            format!("folded-nct(df={}, T=[0,{}])", self.df.value(), self.t_hi)
        } else {
            format!("folded-nct(df={})", self.df.value())
        }
    }

    fn log_density(&self, t: f64, theta: f64) -> f64 {
        if t < 0.0 {
            return f64::NEG_INFINITY;
        }
        self.kernel.folded(t, theta.abs()).unwrap_or(f64::NAN)
    }

    fn theta_space(&self) -> Interval {
        Interval { lo: 0.0, hi: self.theta_cap }
    }

    fn statistic_space(&self) -> Interval {
        Interval { lo: 0.0, hi: self.t_hi }
    }

    fn null_theta(&self) -> f64 {
        0.0
    }

    fn member_domain(&self, theta: f64) -> (f64, f64) {
        (0.0, (theta.abs() + TAIL_WIDTH).min(self.t_hi))
    }

    fn sample(&self, theta: f64, rng: &mut dyn RngCore) -> f64 {
        let m = FoldedNoncentralT::new(theta.abs(), self.df).expect("valid member");
        m.sample(rng)
    }
}

/// `g(t | theta) = phi((t - theta) / sigma) / sigma`, a location family used
/// as an analytically tractable test bed. On a truncated statistic space the
/// density is not renormalized.
#[derive(Debug, Clone)]
pub struct NormalLocationFamily {
    sigma: f64,
    theta: Interval,
    stat: Interval,
    null_theta: f64,
}

impl NormalLocationFamily {
    pub fn new(sigma: f64, theta: Interval, stat: Interval) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return domain(format!("sigma must be positive, got {sigma}"));
        }
        if !theta.is_bounded() {
            return domain("normal-location parameter space must be bounded");
        }
        let null_theta = 0.0f64.clamp(theta.lo, theta.hi);
        Ok(Self {
            sigma,
            theta,
            stat,
            null_theta,
        })
    }

    pub fn with_null(mut self, null_theta: f64) -> Result<Self> {
        if !self.theta.contains(null_theta) {
            return domain(format!("null theta {null_theta} outside parameter space"));
        }
        self.null_theta = null_theta;
        Ok(self)
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }
}

impl SamplingFamily for NormalLocationFamily {
    fn name(&self) -> String {
        format!(
            "normal-location(sigma={}, T=[{},{}])",
            self.sigma, self.stat.lo, self.stat.hi
        )
    }

    fn log_density(&self, t: f64, theta: f64) -> f64 {
        let z = (t - theta) / self.sigma;
        -0.5 * z * z - 0.5 * (2.0 * std::f64::consts::PI).ln() - self.sigma.ln()
    }

    fn theta_space(&self) -> Interval {
        self.theta
    }

    fn statistic_space(&self) -> Interval {
        self.stat
    }

    fn null_theta(&self) -> f64 {
        self.null_theta
    }

    fn member_domain(&self, theta: f64) -> (f64, f64) {
        let w = TAIL_WIDTH * self.sigma;
        ((theta - w).max(self.stat.lo), (theta + w).min(self.stat.hi))
    }

    fn sample(&self, theta: f64, rng: &mut dyn RngCore) -> f64 {
        use rand_distr::{Distribution, StandardNormal};
        loop {
            let z: f64 = StandardNormal.sample(rng);
            let t = theta + self.sigma * z;
            if self.stat.contains(t) {
                return t;
            }
        }
    }
}

/// Location of a maximum of a (weighted) likelihood.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub theta: f64,
    /// Log of the maximized (weighted) likelihood.
    pub log_value: f64,
    pub boundary: Option<Boundary>,
}

impl Estimate {
    /// True when the maximizer sits on the upper end of the parameter space.
    pub fn hit_cap(&self) -> bool {
        self.boundary == Some(Boundary::Upper)
    }
}

fn check_statistic(fam: &dyn SamplingFamily, t: f64) -> Result<()> {
    if !fam.statistic_space().contains(t) {
        return domain(format!("statistic {t} outside the statistic space of {}", fam.name()));
    }
    Ok(())
}

/// Maximum-likelihood estimate `theta_hat(t)`.
pub fn mle(fam: &dyn SamplingFamily, t: f64) -> Result<Estimate> {
    check_statistic(fam, t)?;
    maximize_weighted(fam, &[(t, 1.0)])
}

fn maximize_weighted(fam: &dyn SamplingFamily, obs: &[(f64, f64)]) -> Result<Estimate> {
    let space = fam.theta_space();
    let objective = |theta: f64| weighted_sum(fam, obs, theta);
    let m = optimize::maximize_scalar(
        objective,
        space.lo,
        space.hi,
        optimize::DEFAULT_GRID_POINTS,
        optimize::DEFAULT_X_TOL,
    )
    .map_err(|e| match e {
        Error::Numerical(msg) => Error::Numerical(format!("{}: {msg}", fam.name())),
        other => other,
    })?;
    Ok(Estimate {
        theta: m.argmax,
        log_value: m.value,
        boundary: m.boundary,
    })
}

fn weighted_sum(fam: &dyn SamplingFamily, obs: &[(f64, f64)], theta: f64) -> f64 {
    let mut s = 0.0;
    for &(t, w) in obs {
        if w != 0.0 {
            s += w * fam.log_density(t, theta);
        }
    }
    s
}

/// A weighted likelihood `sum_j w_j ln g(t_j | theta)` with one focus
/// statistic.
#[derive(Debug, Clone)]
pub struct WeightedLikelihood {
    family: Arc<dyn SamplingFamily>,
    observations: Vec<(f64, f64)>,
    focus_index: usize,
}

impl WeightedLikelihood {
    pub fn new(
        family: Arc<dyn SamplingFamily>,
        observations: Vec<(f64, f64)>,
        focus_index: usize,
    ) -> Result<Self> {
        if focus_index >= observations.len() {
            return domain(format!(
                "focus index {focus_index} out of range for {} observations",
                observations.len()
            ));
        }
        let mut total = 0.0;
        for &(t, w) in &observations {
            if !(w >= 0.0) {
                return domain(format!("weights must be nonnegative, got {w}"));
            }
            check_statistic(family.as_ref(), t)?;
            total += w;
        }
        if (total - 1.0).abs() > 1e-12 {
            return domain(format!("weights must sum to 1, got {total}"));
        }
        let wf = observations[focus_index].1;
        if observations.iter().any(|&(_, w)| w > wf) {
            return domain("focus weight must be at least every incidental weight");
        }
        Ok(Self {
            family,
            observations,
            focus_index,
        })
    }

    /// Focus statistic `t` with weight `1 - w0` and pseudo-observation `t0`
    /// with weight `w0`.
    pub fn with_pseudo_observation(
        family: Arc<dyn SamplingFamily>,
        t0: f64,
        w0: f64,
        t: f64,
    ) -> Result<Self> {
        Self::new(family, vec![(t0, w0), (t, 1.0 - w0)], 1)
    }

    pub fn family(&self) -> &Arc<dyn SamplingFamily> {
        &self.family
    }

    pub fn observations(&self) -> &[(f64, f64)] {
        &self.observations
    }

    pub fn focus(&self) -> (f64, f64) {
        self.observations[self.focus_index]
    }
}

pub fn weighted_log_likelihood(wl: &WeightedLikelihood, theta: f64) -> Result<f64> {
    if !wl.family.theta_space().contains(theta) {
        return domain(format!("theta = {theta} outside the parameter space"));
    }
    let v = weighted_sum(wl.family.as_ref(), &wl.observations, theta);
    if v.is_nan() {
        return Err(Error::Numerical(format!("weighted log-likelihood is NaN at theta = {theta}")));
    }
    Ok(v)
}

/// Maximum-weighted-likelihood estimate `theta_bar`.
pub fn mwle(wl: &WeightedLikelihood) -> Result<Estimate> {
    maximize_weighted(wl.family.as_ref(), &wl.observations)
}

/// `mwle` for a focus statistic and one pseudo-observation, skipping the
/// validation of a full `WeightedLikelihood`.
pub(crate) fn mwle_pseudo(fam: &dyn SamplingFamily, t0: f64, w0: f64, t: f64) -> Result<Estimate> {
    maximize_weighted(fam, &[(t0, w0), (t, 1.0 - w0)])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn normal() -> Arc<dyn SamplingFamily> {
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
    fn normal_location_mle_is_the_observation() {
        let fam = normal();
        for &t in &[-3.2, 0.0, 0.77, 4.9] {
            let e = mle(fam.as_ref(), t).unwrap();
            assert!((e.theta - t).abs() < 1e-8, "{t}: {}", e.theta);
        }
    }

    #[test]
    fn folded_nct_mle_at_zero_is_boundary() {
        let e = mle(nct(117.0).as_ref(), 0.0).unwrap();
        assert_eq!(e.theta, 0.0);
        assert_eq!(e.boundary, Some(Boundary::Lower));
    }

    #[test]
    fn statistic_outside_space_is_rejected() {
        assert!(mle(normal().as_ref(), 6.0).is_err());
        assert!(mle(nct(10.0).as_ref(), -1.0).is_err());
    }

    #[test]
    fn degenerate_weights_equal_log_density() {
        let fam = normal();
        let wl = WeightedLikelihood::new(fam.clone(), vec![(1.3, 1.0)], 0).unwrap();
        let v = weighted_log_likelihood(&wl, 0.4).unwrap();
        assert_eq!(v, fam.log_density(1.3, 0.4));
    }

    #[test]
    fn equal_weights_average_log_densities() {
        let fam = nct(20.0);
        let wl = WeightedLikelihood::new(fam.clone(), vec![(0.5, 0.5), (2.0, 0.5)], 1).unwrap();
        let v = weighted_log_likelihood(&wl, 1.1).unwrap();
        let expect = 0.5 * (fam.log_density(0.5, 1.1) + fam.log_density(2.0, 1.1));
        assert!((v - expect).abs() < 1e-14);
    }

    #[test]
    fn weighted_normal_mwle_is_weighted_mean() {
        let fam = normal();
        let w0 = 0.25;
        let wl = WeightedLikelihood::with_pseudo_observation(fam, -1.0, w0, 3.0).unwrap();
        let e = mwle(&wl).unwrap();
        assert!((e.theta - (-w0 + (1.0 - w0) * 3.0)).abs() < 1e-8);
    }

    #[test]
    fn zero_incidental_weight_matches_mle() {
        let fam = nct(117.0);
        let wl = WeightedLikelihood::with_pseudo_observation(fam.clone(), 0.0, 0.0, 3.0).unwrap();
        let a = mwle(&wl).unwrap();
        let b = mle(fam.as_ref(), 3.0).unwrap();
        assert!((a.theta - b.theta).abs() < 1e-8);
    }

    #[test]
    fn invalid_weights_are_rejected() {
        let fam = normal();
        assert!(WeightedLikelihood::new(fam.clone(), vec![(0.0, 0.6), (1.0, 0.6)], 0).is_err());
        assert!(WeightedLikelihood::new(fam.clone(), vec![(0.0, -0.1), (1.0, 1.1)], 1).is_err());
        // focus weight smaller than incidental
        assert!(WeightedLikelihood::new(fam.clone(), vec![(0.0, 0.7), (1.0, 0.3)], 1).is_err());
        assert!(WeightedLikelihood::new(fam, vec![(0.0, 1.0)], 3).is_err());
    }

    #[test]
    fn theta_cap_is_configurable() {
        let f = FoldedNctFamily::new(DegreesOfFreedom::new(117.0).unwrap())
            .with_theta_cap(5.0)
            .unwrap();
        let e = mle(&f, 9.0).unwrap();
        assert_eq!(e.theta, 5.0);
        assert!(e.hit_cap());
        assert!(FoldedNctFamily::new(DegreesOfFreedom::new(3.0).unwrap()).with_theta_cap(-1.0).is_err());
    }
}
