//! Log-gamma, Student t, noncentral t and the folded (absolute value)
//! noncentral t.
//!
//! Everything is computed in log form; linear-scale functions are thin
//! wrappers.
//!
//! The noncentral t density is evaluated from the expansion
//!
//! ```text
//! f(t) = C(t) * sum_k y^k Gamma((nu + 1 + k) / 2) / k!,   y = delta t sqrt(2 / (nu + t^2))
//! ```
//!
//! split into its even and odd parts. Both parts are summed outward from
//! their largest term, so large noncentralities cost more terms but keep
//! full precision. When `delta * t < 0` the odd part enters with a negative
//! sign; if the two parts cancel to fewer than six significant digits the
//! density is computed instead by quadrature of its mixture representation
//! over the chi distribution. The folded density only ever needs the even
//! part, which has no cancellation.

use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::quadrature::{self, KahanSum, QuadratureSpec, Rule};

const LN_2: f64 = std::f64::consts::LN_2;
const LN_2PI: f64 = 1.837_877_066_409_345_5;
const SERIES_CAP: usize = 10_000;
const SERIES_EPS: f64 = 1e-17;
/// Largest tolerated ratio odd/even before the signed density switches to
/// quadrature.
const CANCELLATION_LIMIT: f64 = 1.0 - 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DegreesOfFreedom(f64);

impl DegreesOfFreedom {
    pub fn new(nu: f64) -> Result<Self> {
        if nu.is_finite() && nu > 0.0 {
            Ok(Self(nu))
        } else {
            domain(format!("degrees of freedom must be positive, got {nu}"))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Noncentrality(f64);

impl Noncentrality {
    pub fn new(delta: f64) -> Result<Self> {
        if delta.is_finite() {
            Ok(Self(delta))
        } else {
            domain(format!("noncentrality must be finite, got {delta}"))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Natural log of the gamma function for `x > 0`.
pub fn ln_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return domain(format!("ln_gamma requires a positive finite argument, got {x}"));
    }
    Ok(ln_gamma_unchecked(x))
}

/// Stirling series above 10; below that, shifted up by the recurrence.
pub(crate) fn ln_gamma_unchecked(x: f64) -> f64 {
    if x == 1.0 || x == 2.0 {
        return 0.0;
    }
    if x < 10.0 {
        let shift = (10.0 - x).ceil() as usize;
        let mut ln_prod = 0.0;
        for i in 0..shift {
            ln_prod += (x + i as f64).ln();
        }
        return stirling(x + shift as f64) - ln_prod;
    }
    stirling(x)
}

fn stirling(z: f64) -> f64 {
    let inv = 1.0 / z;
    let inv2 = inv * inv;
    let series = inv
        * (1.0 / 12.0
            + inv2
                * (-1.0 / 360.0
                    + inv2
                        * (1.0 / 1260.0
                            + inv2
                                * (-1.0 / 1680.0
                                    + inv2
                                        * (1.0 / 1188.0
                                            + inv2 * (-691.0 / 360_360.0 + inv2 * (1.0 / 156.0)))))));
    (z - 0.5) * z.ln() - z + 0.5 * LN_2PI + series
}

pub fn central_t_ln_pdf(t: f64, df: DegreesOfFreedom) -> f64 {
    let nu = df.0;
    ln_gamma_unchecked(0.5 * (nu + 1.0))
        - ln_gamma_unchecked(0.5 * nu)
        - 0.5 * (std::f64::consts::PI * nu).ln()
        - 0.5 * (nu + 1.0) * (t * t / nu).ln_1p()
}

pub fn central_t_pdf(t: f64, df: DegreesOfFreedom) -> f64 {
    central_t_ln_pdf(t, df).exp()
}

/// Precomputed constants of the expansion for one value of nu.
#[derive(Debug, Clone, Copy)]
pub(crate) struct NctKernel {
    nu: f64,
    ln_norm: f64,
    ln_central_norm: f64,
}

impl NctKernel {
    pub(crate) fn new(nu: f64) -> Self {
        let g_half = ln_gamma_unchecked(0.5 * nu);
        Self {
            nu,
            ln_norm: -0.5 * (std::f64::consts::PI * nu).ln() - g_half,
            ln_central_norm: ln_gamma_unchecked(0.5 * (nu + 1.0))
                - g_half
                - 0.5 * (std::f64::consts::PI * nu).ln(),
        }
    }

    fn central(&self, t: f64) -> f64 {
        self.ln_central_norm - 0.5 * (self.nu + 1.0) * (t * t / self.nu).ln_1p()
    }

    fn ln_prefactor(&self, t: f64, delta: f64) -> f64 {
        self.ln_norm - 0.5 * delta * delta - 0.5 * (self.nu + 1.0) * (t * t / self.nu).ln_1p()
    }

    fn y(&self, t: f64, delta: f64) -> f64 {
        delta * t * (2.0 / (self.nu + t * t)).sqrt()
    }

    /// ln of the folded density at `t >= 0`, `theta >= 0`.
    pub(crate) fn folded(&self, t: f64, theta: f64) -> Result<f64> {
        if theta == 0.0 {
            return Ok(LN_2 + self.central(t));
        }
        let y = self.y(t, theta).abs();
        Ok(LN_2 + self.ln_prefactor(t, theta) + ln_parity_series(y, self.nu, 0)?)
    }

    pub(crate) fn signed(&self, t: f64, delta: f64) -> Result<f64> {
        if delta == 0.0 {
            return Ok(self.central(t));
        }
        let y = self.y(t, delta);
        let ya = y.abs();
        let even = ln_parity_series(ya, self.nu, 0)?;
        let odd = ln_parity_series(ya, self.nu, 1)?;
        let pre = self.ln_prefactor(t, delta);
        if y >= 0.0 {
            return Ok(pre + log_add_exp(even, odd));
        }
        let r = (odd - even).exp();
        if r < CANCELLATION_LIMIT {
            Ok(pre + even + (-r).ln_1p())
        } else {
            nct_ln_pdf_by_quadrature(t, self.nu, delta)
        }
    }
}

/// `ln sum_{k = parity mod 2} y^k Gamma((nu + 1 + k)/2) / k!` for `y >= 0`.
fn ln_parity_series(y: f64, nu: f64, parity: usize) -> Result<f64> {
    if y == 0.0 {
        return Ok(if parity == 0 {
            ln_gamma_unchecked(0.5 * (nu + 1.0))
        } else {
            f64::NEG_INFINITY
        });
    }
    let y2 = y * y;
    // a_{k+2} / a_k
    let ratio = |k: f64| y2 * 0.5 * (nu + 1.0 + k) / ((k + 1.0) * (k + 2.0));
    // Largest term: root of (k+1)(k+2) = y^2 (nu+1+k)/2.
    let b = 3.0 - 0.5 * y2;
    let c = 2.0 - 0.5 * y2 * (nu + 1.0);
    let disc = b * b - 4.0 * c;
    let root = if disc > 0.0 { 0.5 * (-b + disc.sqrt()) } else { 0.0 };
    let mut k_peak = root.max(0.0).floor() as usize;
    if k_peak % 2 != parity {
        k_peak += 1;
    }
    let kp = k_peak as f64;
    let ln_peak = kp * y.ln() + ln_gamma_unchecked(0.5 * (nu + 1.0 + kp)) - ln_gamma_unchecked(kp + 1.0);

    let mut sum = KahanSum::default();
    sum.add(1.0);
    let mut iterations = 1;
    let mut term = 1.0;
    let mut k = kp;
    loop {
        term *= ratio(k);
        k += 2.0;
        sum.add(term);
        iterations += 1;
        if term < SERIES_EPS * sum.value() {
            break;
        }
        if iterations > SERIES_CAP {
            return Err(Error::SeriesNonConvergence { iterations, y, nu });
        }
    }
    let mut term = 1.0;
    let mut k = k_peak;
    while k >= parity + 2 {
        term /= ratio((k - 2) as f64);
        k -= 2;
        sum.add(term);
        iterations += 1;
        if term < SERIES_EPS * sum.value() {
            break;
        }
        if iterations > SERIES_CAP {
            return Err(Error::SeriesNonConvergence { iterations, y, nu });
        }
    }
    Ok(ln_peak + sum.value().ln())
}

pub(crate) fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// `f(t) = int_0^inf phi(t s - delta) s h(s) ds` with `h` the density of
/// `sqrt(chi2_nu / nu)`, integrated after scaling by its peak.
fn nct_ln_pdf_by_quadrature(t: f64, nu: f64, delta: f64) -> Result<f64> {
    let ln_h_norm = LN_2 + 0.5 * nu * (0.5 * nu).ln() - ln_gamma_unchecked(0.5 * nu);
    let ln_integrand = |s: f64| {
        if s <= 0.0 {
            return f64::NEG_INFINITY;
        }
        let z = t * s - delta;
        -0.5 * LN_2PI - 0.5 * z * z + s.ln() + ln_h_norm + (nu - 1.0) * s.ln() - 0.5 * nu * s * s
    };
    let s_hi = 12.0 + 40.0 / nu.sqrt();
    let n_scan = 4000;
    let step = s_hi / n_scan as f64;
    let scan: Vec<f64> = (0..=n_scan).map(|i| ln_integrand(i as f64 * step)).collect();
    let peak = scan.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !peak.is_finite() {
        return Err(Error::Numerical(format!(
            "noncentral t quadrature found no mass (t = {t}, nu = {nu}, delta = {delta})"
        )));
    }
    let cutoff = peak - 50.0;
    let first = scan.iter().position(|&v| v > cutoff).unwrap_or(0);
    let last = scan.iter().rposition(|&v| v > cutoff).unwrap_or(n_scan);
    let a = (first.saturating_sub(1)) as f64 * step;
    let b = ((last + 1).min(n_scan)) as f64 * step;
    let spec = QuadratureSpec {
        rule: Rule::GaussLegendreComposite,
        abs_tol: 1e-300,
        rel_tol: 1e-13,
        ..Default::default()
    };
    let r = quadrature::integrate(|s| (ln_integrand(s) - peak).exp(), a, b, &spec)?;
    Ok(peak + r.value.ln())
}

pub fn noncentral_t_ln_pdf(t: f64, df: DegreesOfFreedom, delta: Noncentrality) -> Result<f64> {
    if !t.is_finite() {
        return domain(format!("t must be finite, got {t}"));
    }
    NctKernel::new(df.0).signed(t, delta.0)
}

pub fn noncentral_t_pdf(t: f64, df: DegreesOfFreedom, delta: Noncentrality) -> Result<f64> {
    noncentral_t_ln_pdf(t, df, delta).map(f64::exp)
}

/// Distribution of `|T|` where `T` is noncentral t with noncentrality
/// `theta` (equivalently `-theta`).
#[derive(Debug, Clone, Copy)]
pub struct FoldedNoncentralT {
    theta: f64,
    df: DegreesOfFreedom,
    kernel: NctKernel,
}

impl FoldedNoncentralT {
    pub fn new(theta: f64, df: DegreesOfFreedom) -> Result<Self> {
        if !(theta.is_finite() && theta >= 0.0) {
            return domain(format!("theta must be finite and nonnegative, got {theta}"));
        }
        Ok(Self {
            theta,
            df,
            kernel: NctKernel::new(df.0),
        })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn df(&self) -> DegreesOfFreedom {
        self.df
    }

    pub fn ln_pdf(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) || !t.is_finite() {
            return domain(format!("folded density needs finite t >= 0, got {t}"));
        }
        self.kernel.folded(t, self.theta)
    }

    pub fn pdf(&self, t: f64) -> Result<f64> {
        self.ln_pdf(t).map(f64::exp)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        let chi = ChiSquared::new(self.df.0).expect("df validated at construction");
        let v: f64 = chi.sample(rng);
        ((z + self.theta) / (v / self.df.0).sqrt()).abs()
    }
}

pub fn folded_nct_pdf(t: f64, fam: &FoldedNoncentralT) -> Result<f64> {
    fam.pdf(t)
}
