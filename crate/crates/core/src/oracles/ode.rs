//! Direct integration of `u'' + (N-1)/r u' = r^2 u / sigma^4`, `u(0) = alpha`,
//! `u'(0) = 0`, with an adaptive Dormand-Prince 5(4) pair.
//!
//! The coordinate singularity at the origin is stepped over with the two-term
//! expansion `u = alpha (1 + x/(N+2))`, `u' = alpha r^3 / (sigma^4 (N+2))`
//! evaluated at a small start radius.

use super::{validate_grid, Origin, RadialGridFn};
use crate::error::{Error, Result};
use crate::params::ModelParams;

const OVERFLOW_LIMIT: f64 = 1e280;
const MAX_STEPS: usize = 10_000_000;

// Dormand-Prince coefficients.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

type State = [f64; 2];

fn rhs(params: &ModelParams, r: f64, y: State) -> State {
    let s2 = params.sigma() * params.sigma();
    [y[1], r * r / (s2 * s2) * y[0] - (params.n() - 1.0) / r * y[1]]
}

fn seed(params: &ModelParams, r: f64) -> State {
    let s2 = params.sigma() * params.sigma();
    let n2 = params.n() + 2.0;
    let alpha = params.alpha();
    [
        alpha * (1.0 + params.expansion_var(r) / n2),
        alpha * r * r * r / (s2 * s2 * n2),
    ]
}

/// Integrate the radial ODE and sample `u` and `u'` on `grid` (starting at 0).
/// `step_tol` is the relative local error tolerance.
pub fn ode_solve(params: &ModelParams, grid: &[f64], step_tol: f64) -> Result<RadialGridFn> {
    validate_grid(grid, true)?;
    if !(step_tol > 0.0 && step_tol < 1.0) {
        return Err(Error::InvalidParams(format!("step_tol must lie in (0, 1), got {step_tol}")));
    }
    // x(r_start) = 2.5e-9: the neglected series terms are below 1e-17 relative.
    let r_start = (0.01 * params.sigma()).min(0.5 * grid[1]);
    let mut r = r_start;
    let mut y = seed(params, r);
    let atol = step_tol * 1e-6 * params.alpha();

    let mut values = vec![params.alpha()];
    let mut derivative = vec![0.0];
    let mut h = r_start * 0.1;
    let mut steps = 0usize;
    for &target in &grid[1..] {
        while r < target {
            let h_try = h.min(target - r);
            let (y_new, err_norm) = dp_step(params, r, y, h_try, step_tol, atol);
            steps += 1;
            if steps > MAX_STEPS {
                return Err(Error::DirectIntegrationRange { r });
            }
            if err_norm <= 1.0 {
                r = if h_try == target - r { target } else { r + h_try };
                y = y_new;
                if !(y[0].abs() < OVERFLOW_LIMIT && y[1].abs() < OVERFLOW_LIMIT) {
                    return Err(Error::DirectIntegrationRange { r });
                }
            }
            let factor = if err_norm == 0.0 {
                5.0
            } else {
                (0.9 * err_norm.powf(-0.2)).clamp(0.2, 5.0)
            };
            // keep the full step size when we only shortened it to land on the target
            if err_norm > 1.0 || h_try == h {
                h = h_try * factor;
            }
        }
        values.push(y[0]);
        derivative.push(y[1]);
    }
    Ok(RadialGridFn {
        r: grid.to_vec(),
        values,
        derivative: Some(derivative),
        origin: Origin::Ode,
    })
}

fn dp_step(params: &ModelParams, r: f64, y: State, h: f64, rtol: f64, atol: f64) -> (State, f64) {
    let mut k = [[0.0; 2]; 7];
    for s in 0..7 {
        let mut ys = y;
        for (j, kj) in k.iter().enumerate().take(s) {
            ys[0] += h * A[s][j] * kj[0];
            ys[1] += h * A[s][j] * kj[1];
        }
        k[s] = rhs(params, r + C[s] * h, ys);
    }
    let mut y5 = y;
    let mut err = [0.0; 2];
    for s in 0..7 {
        for c in 0..2 {
            y5[c] += h * B5[s] * k[s][c];
            err[c] += h * (B5[s] - B4[s]) * k[s][c];
        }
    }
    let norm = (0..2)
        .map(|c| err[c].abs() / (atol + rtol * y[c].abs().max(y5[c].abs())))
        .fold(0.0, f64::max);
    (y5, norm)
}
