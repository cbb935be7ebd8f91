//! Independent solvers and exact fixtures that certify the series kernel and
//! the rate evaluator.
//!
//! None of these share code with [`crate::series`] beyond [`crate::ModelParams`]:
//! Picard iteration uses trapezoid quadrature, the direct solver integrates the
//! radial ODE with an embedded Runge-Kutta pair, and the 4-D fixtures use
//! closed-form derivatives.

mod bounds;
mod exact4d;
mod ode;
mod picard;

pub use bounds::{check_bounds, BoundKind, BoundMargin, BoundsReport, BOUND_SLACK};
pub use exact4d::{verify_exact_4d, Exact4dBranch, Exact4dReport, EXACT_RESIDUAL_TOL};
pub use ode::ode_solve;
pub use picard::{picard_increment_bound, picard_solve, PicardRun, REFINE_TOL};

use crate::error::{Error, Result};

/// Which solver produced a [`RadialGridFn`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Origin {
    Picard,
    Ode,
    Exact4d,
}

/// A radial function sampled on a grid.
#[derive(Debug, Clone)]
pub struct RadialGridFn {
    pub r: Vec<f64>,
    pub values: Vec<f64>,
    /// `u'` on the same grid, when the solver produces it.
    pub derivative: Option<Vec<f64>>,
    pub origin: Origin,
}

impl RadialGridFn {
    /// Largest relative difference to `other` on a shared grid.
    pub fn max_rel_diff(&self, other: &RadialGridFn) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs() / b.abs())
            .fold(0.0, f64::max)
    }
}

/// Grid must be strictly increasing with finite entries; radial solvers also
/// need it to start at the origin.
pub(crate) fn validate_grid(grid: &[f64], from_origin: bool) -> Result<()> {
    if grid.len() < 2 {
        return Err(Error::InvalidGrid("need at least two points".into()));
    }
    if grid.iter().any(|r| !r.is_finite()) {
        return Err(Error::InvalidGrid("non-finite grid point".into()));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidGrid("grid must be strictly increasing".into()));
    }
    if from_origin && grid[0] != 0.0 {
        return Err(Error::InvalidGrid("grid must start at r = 0".into()));
    }
    if !from_origin && grid[0] <= 0.0 {
        return Err(Error::InvalidGrid("grid must exclude the origin".into()));
    }
    Ok(())
}
