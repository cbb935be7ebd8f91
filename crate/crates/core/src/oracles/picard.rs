//! Successive approximation of the integral form
//!
//! ```text
//! u^0 = alpha,   u^k(r) = alpha + int_0^r t^{1-N} int_0^t s^{N+1} sigma^{-4} u^{k-1}(s) ds dt
//! ```
//!
//! Both integrals use composite trapezoid rules on a refinement of the caller's
//! grid. The inner integral is accumulated as `J(t) = t^{1-N} int_0^t ...`,
//! which is `u'(t)` and stays in range for large N. Each refinement level runs
//! two grids (spacing `h` and `h/2`) in lockstep and combines them by Richardson
//! extrapolation; levels are doubled until consecutive extrapolated solutions
//! agree to [`REFINE_TOL`].

use super::{validate_grid, Origin, RadialGridFn};
use crate::error::{Error, Result};
use crate::params::ModelParams;

/// Relative agreement required between consecutive refinement levels.
pub const REFINE_TOL: f64 = 1e-10;
const MAX_SUBDIVISIONS: usize = 1 << 12;
const MAX_NODES: usize = 1 << 22;

/// Result of a Picard run.
#[derive(Debug, Clone)]
pub struct PicardRun {
    pub solution: RadialGridFn,
    /// Number of iterations performed at the accepted level.
    pub iterations: usize,
    /// `sup_r |u^{k+1} - u^k|` of the extrapolated iterates, for `k = 0..iterations`.
    pub sup_differences: Vec<f64>,
    /// Whether every iterate was pointwise no smaller than its predecessor.
    pub monotone: bool,
    /// Subintervals per caller grid interval at the accepted level (coarse grid).
    pub subdivisions: usize,
}

impl PicardRun {
    /// Iterations `(k, measured, bound)` whose increment exceeds
    /// [`picard_increment_bound`] by more than `abs_slack` plus rounding
    /// (`1e-12` relative to the bound and `4 eps sup|u|`).
    pub fn increment_bound_violations(&self, params: &ModelParams, abs_slack: f64) -> Vec<(usize, f64, f64)> {
        let sup_u = self.solution.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let rounding = 4.0 * f64::EPSILON * sup_u;
        self.sup_differences
            .iter()
            .enumerate()
            .map(|(k, &d)| (k, d, picard_increment_bound(params, k)))
            .filter(|&(_, d, b)| d.is_nan() || d > b * (1.0 + 1e-12) + rounding + abs_slack)
            .collect()
    }
}

/// Analytic bound on `sup_{[0,R]} (u^{k+1} - u^k)`:
/// `alpha / (k+1)! * (R^4 / (4 sigma^4 (N+2)))^{k+1}`.
pub fn picard_increment_bound(params: &ModelParams, k: usize) -> f64 {
    let radius = params.radius();
    let y = params.expansion_var(radius) / (params.n() + 2.0);
    let mut bound = params.alpha();
    for i in 1..=k + 1 {
        bound *= y / i as f64;
    }
    bound
}

/// Run Picard iteration on `grid` (which must start at 0 and stay within
/// `[0, R]`). Iteration stops once `sup|u^{k+1} - u^k| < tol * sup|u^{k+1}|`.
pub fn picard_solve(params: &ModelParams, grid: &[f64], k_max: usize, tol: f64) -> Result<PicardRun> {
    validate_grid(grid, true)?;
    if grid[grid.len() - 1] > params.radius() * (1.0 + 1e-15) {
        return Err(Error::InvalidGrid(format!(
            "grid extends past R = {}",
            params.radius()
        )));
    }
    if k_max == 0 || tol.is_nan() || tol <= 0.0 {
        return Err(Error::InvalidParams("k_max must be >= 1 and tol > 0".into()));
    }

    let mut previous: Option<Vec<f64>> = None;
    let mut m = 1;
    let mut last_change = f64::INFINITY;
    while m <= MAX_SUBDIVISIONS && 2 * m * (grid.len() - 1) < MAX_NODES {
        let run = run_pair(params, grid, m, k_max, tol)?;
        if let Some(prev) = &previous {
            last_change = prev
                .iter()
                .zip(&run.solution.values)
                .map(|(a, b)| (a - b).abs() / b.abs())
                .fold(0.0, f64::max);
            if last_change < REFINE_TOL {
                return Ok(run);
            }
        }
        previous = Some(run.solution.values);
        m *= 2;
    }
    Err(Error::RefinementNotConverged {
        achieved: last_change,
        tol: REFINE_TOL,
    })
}

/// Discrete Picard operator on one refined grid.
struct Level {
    h: Vec<f64>,
    // (t_i / t_{i+1})^{N-1}
    ratio_pow: Vec<f64>,
    t_sq: Vec<f64>,
    inv_s4: f64,
    alpha: f64,
    u: Vec<f64>,
    next: Vec<f64>,
    slope: Vec<f64>,
}

impl Level {
    fn new(params: &ModelParams, grid: &[f64], sub: usize) -> Self {
        let mut t = Vec::with_capacity((grid.len() - 1) * sub + 1);
        t.push(grid[0]);
        for w in grid.windows(2) {
            let h = (w[1] - w[0]) / sub as f64;
            for k in 1..sub {
                t.push(w[0] + h * k as f64);
            }
            t.push(w[1]);
        }
        let exponent = params.n_goods() as i32 - 1;
        let h = t.windows(2).map(|w| w[1] - w[0]).collect();
        let ratio_pow = t.windows(2).map(|w| (w[0] / w[1]).powi(exponent)).collect();
        let t_sq = t.iter().map(|v| v * v).collect();
        let s2 = params.sigma() * params.sigma();
        let n = t.len();
        Self {
            h,
            ratio_pow,
            t_sq,
            inv_s4: 1.0 / (s2 * s2),
            alpha: params.alpha(),
            u: vec![params.alpha(); n],
            next: vec![0.0; n],
            slope: vec![0.0; n],
        }
    }

    /// One application of the integral operator; result lands in `self.u`.
    fn step(&mut self) {
        self.slope[0] = 0.0;
        self.next[0] = self.alpha;
        for i in 0..self.h.len() {
            let q = self.ratio_pow[i];
            let inner = 0.5
                * self.h[i]
                * (q * self.t_sq[i] * self.u[i] + self.t_sq[i + 1] * self.u[i + 1])
                * self.inv_s4;
            self.slope[i + 1] = q * self.slope[i] + inner;
            self.next[i + 1] = self.next[i] + 0.5 * self.h[i] * (self.slope[i] + self.slope[i + 1]);
        }
        std::mem::swap(&mut self.u, &mut self.next);
    }
}

fn run_pair(params: &ModelParams, grid: &[f64], m: usize, k_max: usize, tol: f64) -> Result<PicardRun> {
    let mut coarse = Level::new(params, grid, m);
    let mut fine = Level::new(params, grid, 2 * m);
    let n_coarse = coarse.u.len();
    let extrapolate = |c: &Level, f: &Level, out: &mut Vec<f64>| {
        out.clear();
        out.extend((0..n_coarse).map(|i| (4.0 * f.u[2 * i] - c.u[i]) / 3.0));
    };

    let mut current = Vec::with_capacity(n_coarse);
    let mut prev_fine = fine.u.clone();
    extrapolate(&coarse, &fine, &mut current);
    let mut previous = current.clone();
    let mut sup_differences = Vec::new();
    let mut monotone = true;
    let mut converged = false;
    let mut last_diff = f64::INFINITY;

    for _ in 0..k_max {
        coarse.step();
        fine.step();
        extrapolate(&coarse, &fine, &mut current);

        let eps = 4.0 * f64::EPSILON;
        monotone &= fine
            .u
            .iter()
            .zip(&prev_fine)
            .all(|(new, old)| *new >= old * (1.0 - eps));
        prev_fine.copy_from_slice(&fine.u);

        let diff = current
            .iter()
            .zip(&previous)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let scale = current.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
        if !diff.is_finite() || !scale.is_finite() {
            return Err(Error::PicardNotConverged {
                achieved: diff,
                iterations: sup_differences.len(),
                tol,
            });
        }
        sup_differences.push(diff);
        last_diff = diff / scale;
        std::mem::swap(&mut current, &mut previous);
        if last_diff < tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::PicardNotConverged {
            achieved: last_diff,
            iterations: sup_differences.len(),
            tol,
        });
    }

    // `previous` holds the latest extrapolated iterate; sample the caller grid.
    let values = previous.iter().step_by(m).copied().collect();
    let derivative = (0..grid.len())
        .map(|k| (4.0 * fine.slope[2 * m * k] - coarse.slope[m * k]) / 3.0)
        .collect();
    Ok(PicardRun {
        solution: RadialGridFn {
            r: grid.to_vec(),
            values,
            derivative: Some(derivative),
            origin: Origin::Picard,
        },
        iterations: sup_differences.len(),
        sup_differences,
        monotone,
        subdivisions: m,
    })
}
