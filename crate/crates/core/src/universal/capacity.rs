//! Capacity-achieving prior of the channel `theta -> T` by Blahut–Arimoto
//! iteration on a parameter grid, with the output discretized by composite
//! Gauss–Legendre nodes. Multiplicative updates are interleaved with
//! safeguarded Newton steps on the weighted points.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use super::{log_sum_exp, mixture_domain, prior_mixture_density, DensityKind, DiscretePrior, UniversalDensity};
use crate::error::{domain, Error, Result};
use crate::family::SamplingFamily;
use crate::quadrature::{gauss_legendre, QuadratureSpec};

const GL_ORDER: usize = 12;
const PANEL_WIDTH: f64 = 0.25;
const MIN_PANELS: usize = 64;
const STEP_GROWTH: f64 = 1.5;
const MAX_STEP: f64 = 64.0;
const NEWTON_EVERY: usize = 10;
const ACTIVE_MASS: f64 = 1e-10;
const NEWTON_RIDGE: f64 = 1e-12;
/// Masses at or below this are exempt from the equalization check.
pub const NEGLIGIBLE_MASS: f64 = 1e-6;

/// Capacity prior with its duality certificate.
#[derive(Debug, Clone, Serialize)]
pub struct CapacityResult {
    pub prior: DiscretePrior,
    /// Mutual information of the returned prior (average redundancy).
    pub capacity_lower: f64,
    /// Largest per-point redundancy of the returned prior's mixture.
    pub capacity_upper: f64,
    pub gap: f64,
    pub iterations: usize,
    pub converged: bool,
    /// `D(g(.|theta_k) || mixture)` on the discretized channel.
    pub redundancy: Vec<f64>,
    /// Average redundancy after each iteration.
    pub lower_bound_history: Vec<f64>,
    pub output_nodes: usize,
}

impl CapacityResult {
    pub fn capacity(&self) -> f64 {
        self.capacity_lower
    }

    /// Largest shortfall `capacity_upper - D_k` over points with mass above
    /// [`NEGLIGIBLE_MASS`].
    pub fn equalization_spread(&self) -> f64 {
        self.prior
            .masses()
            .iter()
            .zip(&self.redundancy)
            .filter(|(&m, _)| m > NEGLIGIBLE_MASS)
            .map(|(_, &d)| self.capacity_upper - d)
            .fold(0.0, f64::max)
    }
}

struct Channel {
    /// Row-normalized transition masses and their logs, one row per grid point.
    mass: Vec<Vec<f64>>,
    ln_mass: Vec<Vec<f64>>,
}

fn discretize(fam: &dyn SamplingFamily, grid: &[f64]) -> Result<Channel> {
    let prior = DiscretePrior::uniform(grid.to_vec())?;
    let (a, b) = mixture_domain(fam, &prior);
    if !(a.is_finite() && b.is_finite() && b > a) {
        return domain(format!("channel output interval [{a}, {b}] is not usable"));
    }
    let panels = (((b - a) / PANEL_WIDTH).ceil() as usize).max(MIN_PANELS);
    let (x, w) = gauss_legendre(GL_ORDER);
    let h = (b - a) / panels as f64;
    let mut nodes = Vec::with_capacity(panels * GL_ORDER);
    let mut ln_weights = Vec::with_capacity(panels * GL_ORDER);
    for p in 0..panels {
        let mid = a + (p as f64 + 0.5) * h;
        for (xi, wi) in x.iter().zip(&w) {
            nodes.push(mid + 0.5 * h * xi);
            ln_weights.push((0.5 * h * wi).ln());
        }
    }
    let rows: Vec<Result<(Vec<f64>, Vec<f64>)>> = grid
        .par_iter()
        .map(|&theta| {
            let ln_raw: Vec<f64> = nodes
                .iter()
                .zip(&ln_weights)
                .map(|(&t, &lw)| fam.log_density(t, theta) + lw)
                .collect();
            if ln_raw.iter().any(|v| v.is_nan()) {
                return Err(Error::Numerical(format!("NaN density in channel row theta = {theta}")));
            }
            let ln_total = log_sum_exp(&ln_raw);
            let ln_row: Vec<f64> = ln_raw.iter().map(|v| v - ln_total).collect();
            let row = ln_row.iter().map(|v| v.exp()).collect();
            Ok((row, ln_row))
        })
        .collect();
    let (mass, ln_mass) = rows.into_iter().collect::<Result<Vec<_>>>()?.into_iter().unzip();
    Ok(Channel { mass, ln_mass })
}

fn redundancies(ch: &Channel, p: &[f64]) -> Vec<f64> {
    let m = ch.mass[0].len();
    let mut out = vec![0.0; m];
    for (pk, row) in p.iter().zip(&ch.mass) {
        if *pk > 0.0 {
            for (o, r) in out.iter_mut().zip(row) {
                *o += pk * r;
            }
        }
    }
    let ln_out: Vec<f64> = out.iter().map(|v| v.ln()).collect();
    ch.mass
        .par_iter()
        .zip(&ch.ln_mass)
        .map(|(row, ln_row)| {
            row.iter()
                .zip(ln_row)
                .zip(&ln_out)
                .filter(|((&r, _), _)| r > 0.0)
                .map(|((&r, &lr), &lo)| r * (lr - lo))
                .sum::<f64>()
        })
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn exponent_step(p: &[f64], d: &[f64], upper: f64, step: f64) -> Vec<f64> {
    let mut next: Vec<f64> = p
        .iter()
        .zip(d)
        .map(|(pk, dk)| pk * (step * (dk - upper)).exp())
        .collect();
    let total: f64 = next.iter().sum();
    for v in &mut next {
        *v /= total;
    }
    next
}

/// Newton step for mutual information restricted to the currently
/// weighted points and the simplex, with backtracking so that the mutual
/// information increases. Returns the new masses, redundancies and mutual
/// information.
fn newton_step(ch: &Channel, p: &[f64], d: &[f64], lower: f64) -> Option<(Vec<f64>, Vec<f64>, f64)> {
    let active: Vec<usize> = (0..p.len()).filter(|&k| p[k] > ACTIVE_MASS).collect();
    let s = active.len();
    if s < 2 {
        return None;
    }
    let m = ch.mass[0].len();
    let mut out = vec![0.0; m];
    for (pk, row) in p.iter().zip(&ch.mass) {
        for (o, r) in out.iter_mut().zip(row) {
            *o += pk * r;
        }
    }
    let inv_out: Vec<f64> = out.iter().map(|&v| if v > 0.0 { 1.0 / v } else { 0.0 }).collect();
    // Hessian of mutual information: -sum_j P_kj P_lj / q_j.
    let rows: Vec<Vec<f64>> = active
        .par_iter()
        .map(|&k| {
            active
                .iter()
                .map(|&l| {
                    -ch.mass[k]
                        .iter()
                        .zip(&ch.mass[l])
                        .zip(&inv_out)
                        .map(|((a, b), w)| a * b * w)
                        .sum::<f64>()
                })
                .collect()
        })
        .collect();
    let scale = rows.iter().enumerate().map(|(i, r)| r[i].abs()).fold(0.0, f64::max);
    let mut kkt = DMatrix::<f64>::zeros(s + 1, s + 1);
    let mut rhs = DVector::<f64>::zeros(s + 1);
    for i in 0..s {
        for j in 0..s {
            kkt[(i, j)] = rows[i][j];
        }
        kkt[(i, i)] -= NEWTON_RIDGE * scale;
        kkt[(i, s)] = -1.0;
        kkt[(s, i)] = 1.0;
        rhs[i] = -d[active[i]];
    }
    let sol = kkt.lu().solve(&rhs)?;
    let delta: Vec<f64> = (0..s).map(|i| sol[i]).collect();
    if delta.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let mut alpha = 1.0_f64;
    for (i, &k) in active.iter().enumerate() {
        if delta[i] < 0.0 {
            alpha = alpha.min(p[k] / -delta[i]);
        }
    }
    for _ in 0..30 {
        let mut cand = p.to_vec();
        for (i, &k) in active.iter().enumerate() {
            cand[k] = (p[k] + alpha * delta[i]).max(0.0);
        }
        let total: f64 = cand.iter().sum();
        for v in &mut cand {
            *v /= total;
        }
        let cand_d = redundancies(ch, &cand);
        let cand_lower = dot(&cand, &cand_d);
        if cand_lower > lower {
            return Some((cand, cand_d, cand_lower));
        }
        alpha *= 0.5;
    }
    None
}

/// `(gap, masses, redundancy, lower, upper)` of one iteration.
type Iterate = (f64, Vec<f64>, Vec<f64>, f64, f64);

/// Blahut–Arimoto from the uniform prior.
pub fn capacity_prior(
    fam: Arc<dyn SamplingFamily>,
    grid: &[f64],
    q: &QuadratureSpec,
    max_iter: usize,
    tol: f64,
) -> Result<CapacityResult> {
    capacity_prior_from(fam, grid, q, max_iter, tol, None)
}

/// Blahut–Arimoto from `init` (uniform when `None`). Stops once the duality
/// gap is below `tol` and every point with non-negligible mass is equalized
/// within `tol`; otherwise returns the iterate with the smallest gap and
/// `converged = false`.
pub fn capacity_prior_from(
    fam: Arc<dyn SamplingFamily>,
    grid: &[f64],
    q: &QuadratureSpec,
    max_iter: usize,
    tol: f64,
    init: Option<&[f64]>,
) -> Result<CapacityResult> {
    if grid.is_empty() {
        return domain("capacity grid is empty");
    }
    let space = fam.theta_space();
    if let Some(&bad) = grid.iter().find(|&&g| !space.contains(g)) {
        return domain(format!("grid point {bad} outside the parameter space"));
    }
    if !(tol > 0.0) {
        return domain("capacity tolerance must be positive");
    }
    q.validate(fam.statistic_space().lo.max(-q.t_max))?;
    let mut p = match init {
        Some(v) => DiscretePrior::from_weights(grid.to_vec(), v.to_vec())?.masses().to_vec(),
        None => DiscretePrior::uniform(grid.to_vec())?.masses().to_vec(),
    };
    if grid.len() == 1 {
        return Ok(CapacityResult {
            prior: DiscretePrior::point_mass(grid[0]),
            capacity_lower: 0.0,
            capacity_upper: 0.0,
            gap: 0.0,
            iterations: 0,
            converged: true,
            redundancy: vec![0.0],
            lower_bound_history: vec![0.0],
            output_nodes: 0,
        });
    }
    let ch = discretize(fam.as_ref(), grid)?;

    let mut history = Vec::new();
    let mut best: Option<Iterate> = None;
    let mut converged = false;
    let mut iterations = 0;
    let mut step = 1.0;
    let mut d = redundancies(&ch, &p);
    let mut lower: f64 = dot(&p, &d);
    for it in 0..=max_iter {
        let upper = d.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let gap = upper - lower;
        history.push(lower);
        iterations = it;
        if best.as_ref().is_none_or(|b| gap < b.0) {
            best = Some((gap, p.clone(), d.clone(), lower, upper));
        }
        let equalized = p
            .iter()
            .zip(&d)
            .all(|(&m, &dk)| m <= NEGLIGIBLE_MASS || upper - dk <= tol);
        if gap < tol && equalized {
            converged = true;
            best = Some((gap, p.clone(), d, lower, upper));
            break;
        }
        if it == max_iter {
            break;
        }
        if it % NEWTON_EVERY == NEWTON_EVERY - 1 {
            if let Some((np, nd, nl)) = newton_step(&ch, &p, &d, lower) {
                p = np;
                d = nd;
                lower = nl;
                continue;
            }
        }
        // Over-relaxed update, kept only while mutual information does not
        // drop; the plain step (step = 1) never decreases it.
        loop {
            let cand = exponent_step(&p, &d, upper, step);
            let cand_d = redundancies(&ch, &cand);
            let cand_lower = dot(&cand, &cand_d);
            if cand_lower >= lower || step == 1.0 {
                p = cand;
                d = cand_d;
                lower = cand_lower.max(lower);
                step = (step * STEP_GROWTH).min(MAX_STEP);
                break;
            }
            step = (step / STEP_GROWTH.powi(2)).max(1.0);
        }
    }
    let (gap, masses, redundancy, lower, upper) = best.expect("at least one iteration");
    if !converged {
        log::warn!("capacity prior did not converge in {max_iter} iterations (gap {gap:.3e})");
    }
    Ok(CapacityResult {
        prior: DiscretePrior::from_weights(grid.to_vec(), masses)?,
        capacity_lower: lower,
        capacity_upper: upper,
        gap,
        iterations,
        converged,
        redundancy,
        lower_bound_history: history,
        output_nodes: ch.mass[0].len(),
    })
}

/// Mixture density of a capacity prior.
pub fn capacity_mixture(
    fam: Arc<dyn SamplingFamily>,
    result: &CapacityResult,
    q: &QuadratureSpec,
) -> Result<UniversalDensity> {
    let mut g = prior_mixture_density(fam, result.prior.clone(), q)?;
    g.kind = DensityKind::CapacityMixture;
    Ok(g)
}
