//! Reference computations that share no code with the library.

#![allow(dead_code)]

use statrs::distribution::{ChiSquared, Continuous, Normal};

/// Composite Simpson's rule with `n` (even) panels.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

/// Noncentral t density as a normal mixture over the chi scale:
/// `T = (Z + delta) / U` with `U = sqrt(V / nu)`, `V ~ chi2(nu)`, so
/// `f(t) = integral of u phi(t u - delta) p_U(u) du`.
pub fn nct_pdf(t: f64, nu: f64, delta: f64) -> f64 {
    let chi = ChiSquared::new(nu).unwrap();
    let z = Normal::new(0.0, 1.0).unwrap();
    let integrand = |u: f64| {
        if u <= 0.0 {
            return 0.0;
        }
        // p_U(u) = 2 nu u chi2(nu u^2)
        let ln_pu = (2.0 * nu * u).ln() + chi.ln_pdf(nu * u * u);
        (u.ln() + z.ln_pdf(t * u - delta) + ln_pu).exp()
    };
    // p_U concentrates around 1 with spread about 1/sqrt(2 nu)
    let hi = 1.0 + 40.0 / (2.0 * nu).sqrt() + 10.0;
    simpson(integrand, 0.0, hi, 400_000)
}

/// `ln Gamma(x)` for positive integers and half-integers through factorials.
pub fn ln_gamma(x: f64) -> f64 {
    let ln_fact = |n: u64| (1..=n).map(|k| (k as f64).ln()).sum::<f64>();
    if x.fract() == 0.0 {
        ln_fact(x as u64 - 1)
    } else {
        assert!((x - 0.5).fract() == 0.0, "only half-integers");
        // Gamma(n + 1/2) = (2n)! sqrt(pi) / (4^n n!)
        let n = (x - 0.5) as u64;
        ln_fact(2 * n) + 0.5 * std::f64::consts::PI.ln() - n as f64 * 4f64.ln() - ln_fact(n)
    }
}

/// Arg max of `f` over a dense uniform grid.
pub fn grid_argmax<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, n: usize) -> (f64, f64) {
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .map(|x| (x, f(x)))
        .fold((lo, f64::NEG_INFINITY), |best, c| if c.1 > best.1 { c } else { best })
}

/// Twenty (t, nu, delta) points with densities well above underflow.
pub const NCT_POINTS: [(f64, f64, f64); 20] = [
    (0.0, 1.0, 0.0),
    (1.5, 1.0, 1.0),
    (-2.0, 2.0, 0.5),
    (3.0, 3.0, 2.0),
    (0.5, 4.0, -1.0),
    (2.4495, 4.0, 2.0),
    (5.0, 5.0, 4.0),
    (-1.0, 7.0, 0.0),
    (1.0, 10.0, 1.5),
    (6.0, 10.0, 5.0),
    (2.0, 17.0, 2.0),
    (0.1, 17.0, 3.0),
    (4.5, 17.0, 3.5),
    (-0.5, 30.0, 0.5),
    (3.0, 60.0, 3.0),
    (8.0, 60.0, 7.5),
    (1.2, 117.0, 0.0),
    (3.0, 117.0, 3.0),
    (5.5, 117.0, 4.0),
    (10.0, 117.0, 10.0),
];
