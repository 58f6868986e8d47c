//! Checks of the asymptotic properties at finite size: KL divergence by
//! quadrature, redundancy-per-observation curves, and the Monte Carlo
//! surrogation-error experiment.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::distributions::DegreesOfFreedom;
use crate::error::{domain, Error, Result};
use crate::family::{FoldedNctFamily, LogDensity, Member, SamplingFamily};
use crate::quadrature::{self, KahanSum, QuadratureSpec};
use crate::universal::{self, DensityKind, DiscretePrior, UniversalDensity};

const SCAN_POINTS: usize = 513;
/// Negative KL estimates down to this size are quadrature noise.
pub const KL_REPORT_FLOOR: f64 = -1e-8;
const TABLE_POINTS: usize = 16385;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", content = "value", rename_all = "kebab-case")]
pub enum Divergence {
    Finite(f64),
    Infinite,
}

impl Divergence {
    pub fn value(&self) -> f64 {
        match *self {
            Divergence::Finite(v) => v,
            Divergence::Infinite => f64::INFINITY,
        }
    }
}

fn scan(a: f64, b: f64) -> impl Iterator<Item = f64> {
    (0..SCAN_POINTS).map(move |i| a + (b - a) * i as f64 / (SCAN_POINTS - 1) as f64)
}

/// `D(p || q) = integral of p ln(p/q)` over `p`'s domain. Infinite when `q`
/// vanishes where `p` has mass. Values in `[KL_REPORT_FLOOR, 0)` are
/// reported as 0.
pub fn kl_divergence(p: &dyn LogDensity, q: &dyn LogDensity, spec: &QuadratureSpec) -> Result<Divergence> {
    let (a, b) = p.domain();
    for t in scan(a, b) {
        let lp = p.ln_pdf(t);
        if lp.is_finite() && lp > -700.0 && q.ln_pdf(t) == f64::NEG_INFINITY {
            return Ok(Divergence::Infinite);
        }
    }
    let integrand = |t: f64| {
        let lp = p.ln_pdf(t);
        if lp == f64::NEG_INFINITY {
            return 0.0;
        }
        lp.exp() * (lp - q.ln_pdf(t))
    };
    match quadrature::integrate(integrand, a, b, spec) {
        Ok(r) => {
            let v = r.value;
            if v < KL_REPORT_FLOOR {
                log::warn!("negative KL divergence {v:e} beyond the reporting floor");
            }
            Ok(Divergence::Finite(if (KL_REPORT_FLOOR..0.0).contains(&v) { 0.0 } else { v }))
        }
        Err(_) if scan(a, b).any(|t| integrand(t) == f64::INFINITY) => Ok(Divergence::Infinite),
        Err(e) => Err(e),
    }
}

/// `D(g(.|theta) || g1*) / n` along increasing sample sizes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RedundancyCurve {
    pub theta: f64,
    pub sizes: Vec<u32>,
    pub kl: Vec<f64>,
    pub kl_per_observation: Vec<f64>,
    pub log_z: Vec<f64>,
}

impl RedundancyCurve {
    pub fn is_strictly_decreasing(&self) -> bool {
        self.kl_per_observation.windows(2).all(|w| w[1] < w[0])
    }

    pub fn last(&self) -> f64 {
        *self.kl_per_observation.last().expect("nonempty curve")
    }
}

/// The universal density built at each sample size.
#[derive(Debug, Clone, PartialEq)]
pub enum CurveDensity {
    /// NMWL with the given pseudo-observation and `n_eff = n`.
    Nmwl { t0: f64 },
    /// Mixture over a fixed prior.
    Mixture(DiscretePrior),
}

/// Folded noncentral t for a two-sample statistic from `n` observations in
/// total (`df = n - 2`).
pub fn folded_t_for_sample_size(n: u32) -> Result<Arc<dyn SamplingFamily>> {
    if n < 3 {
        return domain(format!("sample size {n} leaves no degrees of freedom"));
    }
    Ok(Arc::new(FoldedNctFamily::new(DegreesOfFreedom::new((n - 2) as f64)?)))
}

pub fn universality_curve<F>(
    family_at: F,
    theta: f64,
    sizes: &[u32],
    density: &CurveDensity,
    q: &QuadratureSpec,
) -> Result<RedundancyCurve>
where
    F: Fn(u32) -> Result<Arc<dyn SamplingFamily>> + Sync,
{
    if sizes.is_empty() || sizes.windows(2).any(|w| w[1] <= w[0]) || sizes[0] == 0 {
        return domain("sample sizes must be positive and strictly increasing");
    }
    let points: Vec<Result<(f64, f64)>> = sizes
        .par_iter()
        .map(|&n| {
            let fam = family_at(n)?;
            let gstar = match density {
                CurveDensity::Nmwl { t0 } => universal::nmwl_density(fam.clone(), *t0, n, q)?,
                CurveDensity::Mixture(prior) => universal::prior_mixture_density(fam.clone(), prior.clone(), q)?,
            };
            let member = Member::new(fam, theta)?;
            match kl_divergence(&member, &gstar, q)? {
                Divergence::Finite(d) => Ok((d, gstar.log_z())),
                Divergence::Infinite => Err(Error::Numerical(format!("infinite redundancy at n = {n}"))),
            }
        })
        .collect();
    let points = points.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(RedundancyCurve {
        theta,
        sizes: sizes.to_vec(),
        kl_per_observation: points.iter().zip(sizes).map(|(p, &n)| p.0 / n as f64).collect(),
        kl: points.iter().map(|p| p.0).collect(),
        log_z: points.iter().map(|p| p.1).collect(),
    })
}

/// Monte Carlo and quadrature values of the surrogation error
/// `eps*(T) = ln g1*(T) - ln g1(T)` for `T` drawn from each prior point, and
/// pooled over the prior (where the expectation is `-D(g1 || g1*)`).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurrogationReport {
    pub theta: Vec<f64>,
    pub masses: Vec<f64>,
    pub estimate: Vec<f64>,
    pub standard_error: Vec<f64>,
    /// `D(g(.|theta) || g1) - D(g(.|theta) || g1*)` by quadrature.
    pub analytic: Vec<f64>,
    pub pooled_estimate: f64,
    pub pooled_standard_error: f64,
    /// `-D(g1 || g1*)`.
    pub pooled_analytic: f64,
    pub draws_per_theta: usize,
    pub seed: u64,
    /// Pooled estimate at most 3 standard errors above zero.
    pub conservative: bool,
    /// Pooled estimate within 3 standard errors of the analytic value.
    pub agrees: bool,
}

/// Draws `draws` statistics from every support point of `prior`, each from
/// its own substream of `seed`.
pub fn conservativeness_check(
    fam: Arc<dyn SamplingFamily>,
    prior: &DiscretePrior,
    gstar: &UniversalDensity,
    draws: usize,
    seed: u64,
    q: &QuadratureSpec,
) -> Result<SurrogationReport> {
    if draws < 2 {
        return domain("need at least two draws per parameter value");
    }
    let g1 = universal::prior_mixture_density(fam.clone(), prior.clone(), q)?;
    let fast: Box<dyn LogDensity> = match gstar.kind() {
        DensityKind::Nml | DensityKind::Nmwl => Box::new(gstar.tabulate(TABLE_POINTS)?),
        _ => Box::new(gstar.clone()),
    };
    let fast = fast.as_ref();

    let per_theta: Vec<Result<(f64, f64, f64)>> = prior
        .support_points()
        .par_iter()
        .enumerate()
        .map(|(k, &theta)| {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            let mut sum = KahanSum::default();
            let mut sum_sq = KahanSum::default();
            for _ in 0..draws {
                let t = fam.sample(theta, &mut rng);
                let e = fast.ln_pdf(t) - g1.ln_pdf(t);
                if !e.is_finite() {
                    return Err(Error::Numerical(format!("surrogation error undefined at t = {t}")));
                }
                sum.add(e);
                sum_sq.add(e * e);
            }
            let n = draws as f64;
            let mean = sum.value() / n;
            let var = ((sum_sq.value() - n * mean * mean) / (n - 1.0)).max(0.0);
            let member = Member::new(fam.clone(), theta)?;
            let analytic = kl_divergence(&member, &g1, q)?.value() - kl_divergence(&member, gstar, q)?.value();
            Ok((mean, (var / n).sqrt(), analytic))
        })
        .collect();
    let per_theta = per_theta.into_iter().collect::<Result<Vec<_>>>()?;

    let masses = prior.masses();
    let pooled_estimate: f64 = per_theta.iter().zip(masses).map(|(r, m)| m * r.0).sum();
    let pooled_standard_error = per_theta
        .iter()
        .zip(masses)
        .map(|(r, m)| (m * r.1).powi(2))
        .sum::<f64>()
        .sqrt();
    let pooled_analytic = -kl_divergence(&g1, gstar, q)?.value();
    let band = 3.0 * pooled_standard_error;
    Ok(SurrogationReport {
        theta: prior.support_points().to_vec(),
        masses: masses.to_vec(),
        estimate: per_theta.iter().map(|r| r.0).collect(),
        standard_error: per_theta.iter().map(|r| r.1).collect(),
        analytic: per_theta.iter().map(|r| r.2).collect(),
        pooled_estimate,
        pooled_standard_error,
        pooled_analytic,
        draws_per_theta: draws,
        seed,
        conservative: pooled_estimate <= band,
        agrees: (pooled_estimate - pooled_analytic).abs() <= band,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::{Interval, NormalLocationFamily};

    fn normal(theta: f64) -> Member {
        let fam: Arc<dyn SamplingFamily> = Arc::new(
            NormalLocationFamily::new(
                1.0,
                Interval::new(-5.0, 5.0).unwrap(),
                Interval::new(-40.0, 40.0).unwrap(),
            )
            .unwrap(),
        );
        Member::new(fam, theta).unwrap()
    }

    #[test]
    fn kl_of_shifted_normals() {
        let d = kl_divergence(&normal(0.0), &normal(1.0), &QuadratureSpec::default()).unwrap();
        assert!((d.value() - 0.5).abs() < 1e-9, "{d:?}");
        let z = kl_divergence(&normal(0.3), &normal(0.3), &QuadratureSpec::default()).unwrap();
        assert!(z.value().abs() <= 1e-8);
    }

    #[test]
    fn point_mass_curve_is_zero() {
        let prior = DiscretePrior::point_mass(2.0);
        let c = universality_curve(
            folded_t_for_sample_size,
            2.0,
            &[10, 40],
            &CurveDensity::Mixture(prior),
            &QuadratureSpec::default(),
        )
        .unwrap();
        assert!(c.kl.iter().all(|d| d.abs() <= 1e-8), "{c:?}");
    }

    #[test]
    fn exact_surrogate_has_zero_error() {
        let fam = folded_t_for_sample_size(19).unwrap();
        let prior = DiscretePrior::new(vec![0.0, 2.0], vec![0.3, 0.7]).unwrap();
        let q = QuadratureSpec::default();
        let g1 = universal::prior_mixture_density(fam.clone(), prior.clone(), &q).unwrap();
        let r = conservativeness_check(fam, &prior, &g1, 500, 3, &q).unwrap();
        assert!(r.pooled_estimate.abs() < 1e-12 && r.pooled_analytic.abs() <= 1e-8);
        assert!(r.conservative && r.agrees);
    }

    #[test]
    fn sizes_must_increase() {
        let r = universality_curve(
            folded_t_for_sample_size,
            1.0,
            &[40, 10],
            &CurveDensity::Nmwl { t0: 0.0 },
            &QuadratureSpec::default(),
        );
        assert!(r.is_err());
    }
}
