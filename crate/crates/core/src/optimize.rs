//! Bounded maximizers: coarse grid + golden section in one dimension,
//! box-constrained Nelder–Mead in two.

use serde::Serialize;

use crate::error::{Error, Result};

pub const DEFAULT_GRID_POINTS: usize = 64;
pub const DEFAULT_X_TOL: f64 = 1e-8;

const INV_PHI: f64 = 0.618_033_988_749_894_9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Lower,
    Upper,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarMax {
    pub argmax: f64,
    pub value: f64,
    pub boundary: Option<Boundary>,
}

/// Global maximum of `f` on `[lo, hi]`.
///
/// The best of `grid_points` equally spaced points brackets the maximum and
/// golden section refines it to `x_tol`. Ties go to the smaller argument.
pub fn maximize_scalar<F>(f: F, lo: f64, hi: f64, grid_points: usize, x_tol: f64) -> Result<ScalarMax>
where
    F: Fn(f64) -> f64,
{
    if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
        return Err(Error::Domain(format!("invalid search interval [{lo}, {hi}]")));
    }
    let eval = |x: f64| -> Result<f64> {
        let v = f(x);
        if v.is_nan() || v == f64::INFINITY {
            Err(Error::Numerical(format!("objective is {v} at {x}")))
        } else {
            Ok(v)
        }
    };
    if lo == hi {
        return Ok(ScalarMax {
            argmax: lo,
            value: eval(lo)?,
            boundary: Some(Boundary::Lower),
        });
    }
    let n = grid_points.max(3);
    let step = (hi - lo) / (n - 1) as f64;
    let xs: Vec<f64> = (0..n)
        .map(|i| if i == n - 1 { hi } else { lo + i as f64 * step })
        .collect();
    let mut best = 0;
    let mut best_v = f64::NEG_INFINITY;
    let mut values = Vec::with_capacity(n);
    for (i, &x) in xs.iter().enumerate() {
        let v = eval(x)?;
        values.push(v);
        if v > best_v {
            best_v = v;
            best = i;
        }
    }
    if best_v == f64::NEG_INFINITY {
        return Err(Error::Numerical(format!(
            "objective is -inf on all of [{lo}, {hi}]"
        )));
    }
    let a = xs[best.saturating_sub(1)];
    let b = xs[(best + 1).min(n - 1)];
    let (gx, gv) = golden_section(&eval, a, b, x_tol)?;
    let (gx, gv) = parabolic_polish(&eval, gx, gv, a, b)?;

    let tie = |v: f64| 1e-14 * v.abs().max(1.0);
    let mut cand = (xs[best], best_v);
    if gv > cand.1 + tie(gv) || (gv >= cand.1 - tie(gv) && gx < cand.0) {
        cand = (gx, gv);
    }
    // Snap to an endpoint within x_tol if it is as good up to rounding.
    let snap = |v: f64| 1e-12 * v.abs().max(1.0);
    if (cand.0 - lo).abs() <= x_tol && values[0] >= cand.1 - snap(cand.1) {
        cand = (lo, values[0]);
    } else if (hi - cand.0).abs() <= x_tol && values[n - 1] >= cand.1 - snap(cand.1) {
        cand = (hi, values[n - 1]);
    }
    let boundary = if cand.0 == lo {
        Some(Boundary::Lower)
    } else if cand.0 == hi {
        Some(Boundary::Upper)
    } else {
        None
    };
    Ok(ScalarMax {
        argmax: cand.0,
        value: cand.1,
        boundary,
    })
}

fn golden_section<F>(f: &F, mut a: f64, mut b: f64, tol: f64) -> Result<(f64, f64)>
where
    F: Fn(f64) -> Result<f64>,
{
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    while (b - a).abs() > tol {
        // `>=` keeps the left part on ties.
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d)?;
        }
    }
    let fa = f(a)?;
    let fb = f(b)?;
    let mut best = if fc >= fd { (c, fc) } else { (d, fd) };
    if fa >= best.1 {
        best = (a, fa);
    }
    if fb > best.1 {
        best = (b, fb);
    }
    Ok(best)
}

/// Successive three-point parabolic steps with shrinking spacing. Function
/// comparisons alone cannot resolve the argmax of a smooth objective below
/// about `sqrt(eps)`; the fitted vertex can.
fn parabolic_polish<F>(f: &F, mut x: f64, mut fx: f64, a: f64, b: f64) -> Result<(f64, f64)>
where
    F: Fn(f64) -> Result<f64>,
{
    let mut h = (b - a) * 1e-3;
    for _ in 0..3 {
        if h <= 0.0 {
            break;
        }
        let x0 = (x - h).max(a);
        let x2 = (x + h).min(b);
        if x2 - x0 < 0.5 * h {
            break;
        }
        let x1 = if x0 < x && x < x2 { x } else { 0.5 * (x0 + x2) };
        let (f0, f1, f2) = (f(x0)?, if x1 == x { fx } else { f(x1)? }, f(x2)?);
        let num = (x1 - x0).powi(2) * (f1 - f2) - (x1 - x2).powi(2) * (f1 - f0);
        let den = (x1 - x0) * (f1 - f2) - (x1 - x2) * (f1 - f0);
        // concave fit only
        let curvature = (f0 - f1) / (x1 - x0) + (f2 - f1) / (x2 - x1);
        if den != 0.0 && curvature < 0.0 {
            let v = (x1 - 0.5 * num / den).clamp(x0, x2);
            let fv = f(v)?;
            if fv >= fx {
                x = v;
                fx = fv;
            }
        }
        for (xc, fc) in [(x0, f0), (x1, f1), (x2, f2)] {
            if fc > fx {
                x = xc;
                fx = fc;
            }
        }
        h *= 0.1;
    }
    Ok((x, fx))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxMax {
    pub argmax: [f64; 2],
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Nelder–Mead maximization inside the box `[lo, hi]`. Trial points are
/// clamped onto the box.
pub fn nelder_mead_box<F>(
    f: F,
    start: [f64; 2],
    initial_step: [f64; 2],
    lo: [f64; 2],
    hi: [f64; 2],
    f_tol: f64,
    max_iter: usize,
) -> BoxMax
where
    F: Fn([f64; 2]) -> f64,
{
    let clamp = |p: [f64; 2]| [p[0].clamp(lo[0], hi[0]), p[1].clamp(lo[1], hi[1])];
    let eval = |p: [f64; 2]| {
        let v = f(p);
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v
        }
    };
    let s0 = clamp(start);
    let mut simplex = [s0, s0, s0];
    for d in 0..2 {
        let mut p = s0;
        p[d] += initial_step[d];
        if p[d] > hi[d] {
            p[d] = s0[d] - initial_step[d];
        }
        simplex[d + 1] = clamp(p);
    }
    let mut values = simplex.map(eval);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        iterations += 1;
        // order: best first
        let mut idx = [0usize, 1, 2];
        idx.sort_by(|&i, &j| values[j].partial_cmp(&values[i]).unwrap_or(std::cmp::Ordering::Equal));
        simplex = idx.map(|i| simplex[i]);
        values = idx.map(|i| values[i]);
        let spread = values[0] - values[2];
        let size = (simplex[0][0] - simplex[2][0]).abs().max((simplex[0][1] - simplex[2][1]).abs())
            .max((simplex[0][0] - simplex[1][0]).abs().max((simplex[0][1] - simplex[1][1]).abs()));
        if (spread.is_finite() && spread.abs() <= f_tol && size < 1e-6) || size < 1e-12 {
            converged = spread.is_finite() && spread.abs() <= f_tol;
            break;
        }
        let centroid = [
            0.5 * (simplex[0][0] + simplex[1][0]),
            0.5 * (simplex[0][1] + simplex[1][1]),
        ];
        let along = |t: f64| {
            clamp([
                centroid[0] + t * (simplex[2][0] - centroid[0]),
                centroid[1] + t * (simplex[2][1] - centroid[1]),
            ])
        };
        let xr = along(-1.0);
        let fr = eval(xr);
        if fr > values[0] {
            let xe = along(-2.0);
            let fe = eval(xe);
            if fe > fr {
                simplex[2] = xe;
                values[2] = fe;
            } else {
                simplex[2] = xr;
                values[2] = fr;
            }
        } else if fr > values[1] {
            simplex[2] = xr;
            values[2] = fr;
        } else {
            let (xc, fc) = if fr > values[2] {
                let xc = along(-0.5);
                (xc, eval(xc))
            } else {
                let xc = along(0.5);
                (xc, eval(xc))
            };
            if fc > values[2].max(fr) {
                simplex[2] = xc;
                values[2] = fc;
            } else {
                for i in 1..3 {
                    simplex[i] = clamp([
                        simplex[0][0] + 0.5 * (simplex[i][0] - simplex[0][0]),
                        simplex[0][1] + 0.5 * (simplex[i][1] - simplex[0][1]),
                    ]);
                    values[i] = eval(simplex[i]);
                }
            }
        }
    }
    let mut best = 0;
    for i in 1..3 {
        if values[i] > values[best] {
            best = i;
        }
    }
    BoxMax {
        argmax: simplex[best],
        value: values[best],
        iterations,
        converged,
    }
}
