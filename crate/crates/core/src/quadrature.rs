//! One-dimensional numerical integration.
//!
//! Two rules are offered: composite Gauss–Legendre with local panel
//! bisection (the default; seed panels are refined in parallel and summed in
//! a fixed order, so results do not depend on the thread schedule) and
//! adaptive Simpson.

use std::sync::OnceLock;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const GL_ORDER: usize = 12;
const INITIAL_PANELS: usize = 32;
const GL_MAX_DEPTH: u32 = 30;
const SIMPSON_MAX_DEPTH: u32 = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rule {
    AdaptiveSimpson,
    GaussLegendreComposite,
}

impl std::str::FromStr for Rule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "adaptive-simpson" => Ok(Rule::AdaptiveSimpson),
            "gauss-legendre-composite" | "gauss-legendre" => Ok(Rule::GaussLegendreComposite),
            other => Err(Error::Input(format!("unknown quadrature rule `{other}`"))),
        }
    }
}

/// Integration settings shared by every density construction.
///
/// `t_max` is the truncation point used when the statistic space is
/// unbounded above. With `extend_tail` the effective upper limit is pushed
/// out until the integrand is negligible; with `divergence_probe` the
/// integrand's tail is tested for non-integrability first.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub rule: Rule,
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub t_max: f64,
    pub divergence_probe: bool,
    pub extend_tail: bool,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            rule: Rule::GaussLegendreComposite,
            abs_tol: 1e-11,
            rel_tol: 1e-10,
            t_max: 20.0,
            divergence_probe: true,
            extend_tail: true,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self, t_lo: f64) -> Result<()> {
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0) {
            return Err(Error::Domain("quadrature tolerances must be positive".into()));
        }
        if !(self.t_max > t_lo) {
            return Err(Error::Domain(format!(
                "t_max = {} must exceed the lower end of the statistic space {}",
                self.t_max, t_lo
            )));
        }
        Ok(())
    }

    pub fn with_t_max(mut self, t_max: f64) -> Self {
        self.t_max = t_max;
        self
    }

    /// Same domain handling, tighter tolerances and the other rule.
    pub fn cross_check(&self) -> Self {
        let rule = match self.rule {
            Rule::AdaptiveSimpson => Rule::GaussLegendreComposite,
            Rule::GaussLegendreComposite => Rule::AdaptiveSimpson,
        };
        Self {
            rule,
            abs_tol: self.abs_tol * 0.5,
            rel_tol: self.rel_tol * 0.5,
            ..*self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub error_estimate: f64,
    pub evaluations: usize,
}

pub fn integrate<F>(f: F, a: f64, b: f64, spec: &QuadratureSpec) -> Result<Integral>
where
    F: Fn(f64) -> f64 + Sync,
{
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Quadrature(format!("infinite limits [{a}, {b}]")));
    }
    if b <= a {
        return Ok(Integral {
            value: 0.0,
            error_estimate: 0.0,
            evaluations: 0,
        });
    }
    match spec.rule {
        Rule::GaussLegendreComposite => gauss_legendre_adaptive(&f, a, b, spec.abs_tol, spec.rel_tol),
        Rule::AdaptiveSimpson => adaptive_simpson(&f, a, b, spec.abs_tol.max(1e-15), spec.rel_tol),
    }
}

/// Nodes and weights of the `n`-point Gauss–Legendre rule on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        dp = if d != 0.0 { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

fn gl_table() -> &'static (Vec<f64>, Vec<f64>) {
    static TABLE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    TABLE.get_or_init(|| gauss_legendre(GL_ORDER))
}

/// Composite Gauss–Legendre on `panels` equal panels.
pub fn composite_gauss_legendre<F>(f: &F, a: f64, b: f64, panels: usize) -> f64
where
    F: Fn(f64) -> f64 + Sync,
{
    let (nodes, weights) = gl_table();
    let h = (b - a) / panels as f64;
    let values: Vec<f64> = (0..panels * GL_ORDER)
        .into_par_iter()
        .map(|idx| {
            let p = idx / GL_ORDER;
            let j = idx % GL_ORDER;
            let mid = a + (p as f64 + 0.5) * h;
            f(mid + 0.5 * h * nodes[j])
        })
        .collect();
    let mut sum = KahanSum::default();
    for (idx, v) in values.iter().enumerate() {
        sum.add(weights[idx % GL_ORDER] * v);
    }
    0.5 * h * sum.value()
}

fn gl_panel<F>(f: &F, a: f64, b: f64) -> f64
where
    F: Fn(f64) -> f64,
{
    let (nodes, weights) = gl_table();
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut sum = KahanSum::default();
    for (x, w) in nodes.iter().zip(weights) {
        sum.add(w * f(mid + half * x));
    }
    half * sum.value()
}

/// Bisects a panel until its value and the sum of its halves agree to `tol`.
fn gl_refine<F>(f: &F, a: f64, b: f64, whole: f64, tol: f64, depth: u32, evaluations: &mut usize) -> (f64, f64, bool)
where
    F: Fn(f64) -> f64,
{
    let m = 0.5 * (a + b);
    let left = gl_panel(f, a, m);
    let right = gl_panel(f, m, b);
    *evaluations += 2 * GL_ORDER;
    let fine = left + right;
    let err = (fine - whole).abs();
    if err <= tol || !fine.is_finite() {
        return (fine, err, true);
    }
    if depth == 0 {
        return (fine, err, false);
    }
    let (l, el, okl) = gl_refine(f, a, m, left, 0.5 * tol, depth - 1, evaluations);
    let (r, er, okr) = gl_refine(f, m, b, right, 0.5 * tol, depth - 1, evaluations);
    (l + r, el + er, okl && okr)
}

fn gauss_legendre_adaptive<F>(f: &F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> Result<Integral>
where
    F: Fn(f64) -> f64 + Sync,
{
    let h = (b - a) / INITIAL_PANELS as f64;
    let edges = |i: usize| (a + i as f64 * h, if i + 1 == INITIAL_PANELS { b } else { a + (i + 1) as f64 * h });
    let seeds: Vec<f64> = (0..INITIAL_PANELS)
        .into_par_iter()
        .map(|i| {
            let (lo, hi) = edges(i);
            gl_panel(f, lo, hi)
        })
        .collect();
    let rough: f64 = seeds.iter().map(|v| v.abs()).sum();
    if !rough.is_finite() {
        return Err(Error::Quadrature(format!("non-finite integrand on [{a}, {b}]")));
    }
    let tol = abs_tol.max(rel_tol * rough);
    let parts: Vec<(f64, f64, bool, usize)> = (0..INITIAL_PANELS)
        .into_par_iter()
        .map(|i| {
            let (lo, hi) = edges(i);
            let mut evaluations = 0;
            let (v, e, ok) = gl_refine(
                f,
                lo,
                hi,
                seeds[i],
                tol / INITIAL_PANELS as f64,
                GL_MAX_DEPTH,
                &mut evaluations,
            );
            (v, e, ok, evaluations)
        })
        .collect();
    let mut total = KahanSum::default();
    let mut error_estimate = 0.0;
    let mut evaluations = INITIAL_PANELS * GL_ORDER;
    let mut converged = true;
    for (v, e, ok, n) in parts {
        total.add(v);
        error_estimate += e;
        evaluations += n;
        converged &= ok;
    }
    let value = total.value();
    if !value.is_finite() {
        return Err(Error::Quadrature(format!(
            "non-finite integrand on [{a}, {b}] (estimate {value})"
        )));
    }
    if !converged && error_estimate > tol {
        return Err(Error::Quadrature(format!(
            "no convergence on [{a}, {b}] after {evaluations} evaluations (error {error_estimate:.3e})"
        )));
    }
    Ok(Integral {
        value,
        error_estimate,
        evaluations,
    })
}

fn adaptive_simpson<F>(f: &F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> Result<Integral>
where
    F: Fn(f64) -> f64,
{
    // Seed with a fixed partition so narrow peaks are not skipped.
    let seeds = 32;
    let h = (b - a) / seeds as f64;
    let mut evaluations = 0;
    let mut panels = Vec::with_capacity(seeds);
    let mut rough = 0.0;
    for i in 0..seeds {
        let lo = a + i as f64 * h;
        let hi = if i + 1 == seeds { b } else { lo + h };
        let mid = 0.5 * (lo + hi);
        let (flo, fmid, fhi) = (f(lo), f(mid), f(hi));
        evaluations += 3;
        let whole = (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi);
        rough += whole.abs();
        panels.push((lo, hi, flo, fmid, fhi, whole));
    }
    let tol = abs_tol.max(rel_tol * rough);
    let mut total = KahanSum::default();
    let mut err_total = 0.0;
    for (lo, hi, flo, fmid, fhi, whole) in panels {
        let (v, e) = simpson_step(
            f,
            lo,
            hi,
            flo,
            fmid,
            fhi,
            whole,
            tol / seeds as f64,
            SIMPSON_MAX_DEPTH,
            &mut evaluations,
        );
        total.add(v);
        err_total += e;
    }
    let value = total.value();
    if !value.is_finite() {
        return Err(Error::Quadrature(format!(
            "non-finite integrand on [{a}, {b}]"
        )));
    }
    Ok(Integral {
        value,
        error_estimate: err_total,
        evaluations,
    })
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
    evaluations: &mut usize,
) -> (f64, f64)
where
    F: Fn(f64) -> f64,
{
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    *evaluations += 2;
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return (left + right + delta / 15.0, delta.abs() / 15.0);
    }
    let (l, el) = simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1, evaluations);
    let (r, er) = simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1, evaluations);
    (l + r, el + er)
}

/// Compensated summation.
#[derive(Debug, Default, Clone, Copy)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    #[inline]
    pub fn add(&mut self, x: f64) {
        let y = x - self.comp;
        let t = self.sum + y;
        self.comp = (t - self.sum) - y;
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_weights_sum_to_two() {
        let (x, w) = gauss_legendre(12);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
        // exact for polynomials of degree 23
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(22)).sum();
        assert!((s - 2.0 / 23.0).abs() < 1e-14);
    }

    #[test]
    fn both_rules_integrate_gaussian() {
        let f = |x: f64| (-0.5 * x * x).exp();
        let exact = (2.0 * std::f64::consts::PI).sqrt();
        for rule in [Rule::GaussLegendreComposite, Rule::AdaptiveSimpson] {
            let spec = QuadratureSpec {
                rule,
                ..Default::default()
            };
            let r = integrate(f, -40.0, 40.0, &spec).unwrap();
            assert!((r.value - exact).abs() < 1e-8, "{rule:?}: {}", r.value);
        }
    }

    #[test]
    fn empty_interval_is_zero() {
        let r = integrate(|x| x, 1.0, 1.0, &QuadratureSpec::default()).unwrap();
        assert_eq!(r.value, 0.0);
    }

    #[test]
    fn non_finite_integrand_is_an_error() {
        let r = integrate(|_| f64::NAN, 0.0, 1.0, &QuadratureSpec::default());
        assert!(matches!(r, Err(Error::Quadrature(_))));
    }

    #[test]
    fn validate_rejects_bad_specs() {
        let s = QuadratureSpec {
            abs_tol: 0.0,
            ..QuadratureSpec::default()
        };
        assert!(s.validate(0.0).is_err());
        let s = QuadratureSpec::default().with_t_max(-1.0);
        assert!(s.validate(0.0).is_err());
    }
}
