use thiserror::Error;

/// Errors raised by the planner library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("series truncation overflow: {required} terms needed, cap is {cap}")]
    TruncationOverflow { required: usize, cap: usize },

    #[error("evaluation outside certified range: r = {r}, certified up to {r_max}")]
    OutOfRange { r: f64, r_max: f64 },

    #[error("start beyond stopping boundary: r0 = {r0} > R = {radius}")]
    StartBeyondBoundary { r0: f64, radius: f64 },

    #[error("quotient series breakdown: {0}")]
    QuotientBreakdown(String),

    #[error("invalid inventory state: {0}")]
    InvalidState(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("Picard not converged: sup-difference {achieved:e} after {iterations} iterations (tol {tol:e})")]
    PicardNotConverged {
        achieved: f64,
        iterations: usize,
        tol: f64,
    },

    #[error("quadrature not self-consistent: relative change {achieved:e} at finest refinement (tol {tol:e})")]
    RefinementNotConverged { achieved: f64, tol: f64 },

    #[error("direct integration range exceeded at r = {r}")]
    DirectIntegrationRange { r: f64 },

    #[error("bound violation: {bound} at r = {r} (margin {margin:e})")]
    BoundViolation {
        bound: &'static str,
        r: f64,
        margin: f64,
    },

    #[error("simulation diverged on path {path} at step {step}")]
    SimulationDiverged { path: u64, step: u64 },

    #[error("no exits within horizon ({n_paths} paths, {max_steps} steps each)")]
    NoExits { n_paths: u64, max_steps: u64 },
}

pub type Result<T> = std::result::Result<T, Error>;
