//! Optimal production rates for the N-goods stochastic production-planning
//! problem.
//!
//! Inventory deviations follow `dy_i = p_i dt + sigma dw_i` until `|y|` first
//! reaches `R`, and the quadratic loss `E int (|p|^2 + |y|^2) dt` is minimised.
//! The value function is `2 sigma^2 ln u(|y|)`, where `u` is the positive radial
//! solution of `Delta u = |x|^2 u / sigma^4` with `u(0) = 1`. The optimal control
//! is the same multiple of the inventory for every good,
//! `p_i = sigma^2 u'(r) / (r u(r)) y_i`.
//!
//! * [`series`] evaluates `u`, `u'` and the expected optimal cost.
//! * [`rate`] evaluates the production-rate coefficient and the feedback law.
//! * [`oracles`] holds independent solvers and bound checks used to certify both.
//! * [`simulate`] runs Euler-Maruyama Monte Carlo of the controlled inventory.

pub mod error;
pub mod math;
pub mod oracles;
pub mod params;
pub mod rate;
pub mod report;
pub mod series;
pub mod simulate;

pub use error::{Error, Result};
pub use params::ModelParams;
pub use rate::{ControlVector, RateSeries, DEFAULT_X_SWITCH};
pub use series::{SeriesKernel, DEFAULT_TERM_TOL};
