//! Euler-Maruyama simulation of the controlled inventory
//! `dy = p(y) dt + sigma dw`, stopped when `|y|` first reaches `R`.
//!
//! Each path draws its normals from its own ChaCha8 stream (`seed`, stream =
//! path index), read sequentially, so a path depends only on `(seed, path)` and
//! never on which thread ran it. Paths run in parallel and are reduced in path
//! order.
//!
//! With `noise_substeps = m` every step consumes `m` draws per component and
//! uses their scaled sum as the Brownian increment. A run with step `dt` and
//! `m = 2` therefore sees exactly the Brownian path of a run with step `dt / 2`
//! and `m = 1`, which makes step-size comparisons low-variance.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::math::norm;
use crate::params::ModelParams;
use crate::rate::RateSeries;
use crate::report::fmt_f64;

/// A state-feedback control law `p = law(y)`.
pub trait FeedbackLaw: Sync {
    fn params(&self) -> &ModelParams;
    fn control_into(&self, y: &[f64], p: &mut [f64]) -> Result<()>;
}

impl FeedbackLaw for RateSeries {
    fn params(&self) -> &ModelParams {
        RateSeries::params(self)
    }

    fn control_into(&self, y: &[f64], p: &mut [f64]) -> Result<()> {
        self.feedback_into(y, p)
    }
}

/// `p = 0`: the uncontrolled comparison process.
#[derive(Debug, Clone)]
pub struct ZeroControl {
    pub params: ModelParams,
}

impl FeedbackLaw for ZeroControl {
    fn params(&self) -> &ModelParams {
        &self.params
    }

    fn control_into(&self, _y: &[f64], p: &mut [f64]) -> Result<()> {
        p.fill(0.0);
        Ok(())
    }
}

/// Default step `1e-4 * min(1, R^2 / sigma^2)`.
pub fn default_dt(params: &ModelParams) -> f64 {
    let s = params.radius() / params.sigma();
    1e-4 * (s * s).min(1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub dt: f64,
    pub max_steps: u64,
    pub n_paths: u64,
    pub seed: u64,
    pub y0: Vec<f64>,
    /// Normal draws summed per component per step (1 for plain Euler-Maruyama).
    pub noise_substeps: u32,
    /// Record `(t, y, cost)` every this many steps; `None` disables traces.
    pub trace_every: Option<u64>,
}

impl SimConfig {
    pub fn new(dt: f64, max_steps: u64, n_paths: u64, seed: u64, y0: Vec<f64>) -> Self {
        Self {
            dt,
            max_steps,
            n_paths,
            seed,
            y0,
            noise_substeps: 1,
            trace_every: None,
        }
    }

    /// The same Brownian paths sampled at half the step.
    pub fn halved(&self) -> Self {
        assert!(self.noise_substeps.is_multiple_of(2), "halving needs an even substep count");
        Self {
            dt: self.dt / 2.0,
            max_steps: self.max_steps * 2,
            noise_substeps: self.noise_substeps / 2,
            ..self.clone()
        }
    }

    pub fn validate(&self, params: &ModelParams) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParams(msg));
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if self.max_steps == 0 {
            return bad("max_steps must be >= 1".into());
        }
        if self.n_paths == 0 {
            return bad("n_paths must be >= 1".into());
        }
        if self.noise_substeps == 0 {
            return bad("noise_substeps must be >= 1".into());
        }
        if self.trace_every == Some(0) {
            return bad("trace_every must be >= 1".into());
        }
        if self.y0.len() != params.n_goods() {
            return bad(format!(
                "y0 has {} components, N = {}",
                self.y0.len(),
                params.n_goods()
            ));
        }
        if self.y0.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidState("non-finite initial inventory".into()));
        }
        Ok(())
    }
}

/// One recorded sample of a path.
#[derive(Debug, Clone, PartialEq)]
pub struct TracePoint {
    pub t: f64,
    pub y: Vec<f64>,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathResult {
    pub tau: f64,
    pub cost: f64,
    pub exited: bool,
    pub steps: u64,
    pub final_state: Vec<f64>,
    pub path_trace: Option<Vec<TracePoint>>,
}

impl PathResult {
    /// CSV `t,y_1,...,y_N,cost` of the recorded trace (header only when untraced).
    pub fn trace_csv(&self) -> String {
        let n = self.final_state.len();
        let mut out = String::from("t");
        for i in 1..=n {
            out.push_str(&format!(",y_{i}"));
        }
        out.push_str(",cost\n");
        for pt in self.path_trace.iter().flatten() {
            out.push_str(&fmt_f64(pt.t));
            for v in &pt.y {
                out.push(',');
                out.push_str(&fmt_f64(*v));
            }
            out.push(',');
            out.push_str(&fmt_f64(pt.cost));
            out.push('\n');
        }
        out
    }
}

/// Simulate path `path_index`. Cost uses left-endpoint values of
/// `|p|^2 + |y|^2`; the path stops at the first step with `|y| >= R`.
pub fn euler_path<F: FeedbackLaw + ?Sized>(law: &F, cfg: &SimConfig, path_index: u64) -> Result<PathResult> {
    let params = law.params();
    cfg.validate(params)?;
    let radius = params.radius();
    let sigma = params.sigma();
    let n = params.n_goods();
    let sub_scale = sigma * (cfg.dt / cfg.noise_substeps as f64).sqrt();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(path_index);

    let mut y = cfg.y0.clone();
    let mut p = vec![0.0; n];
    let mut cost = 0.0;
    let mut steps = 0u64;
    let mut trace = cfg.trace_every.map(|_| {
        vec![TracePoint {
            t: 0.0,
            y: y.clone(),
            cost: 0.0,
        }]
    });
    let mut exited = norm(&y) >= radius;

    while !exited && steps < cfg.max_steps {
        law.control_into(&y, &mut p)?;
        let p2: f64 = p.iter().map(|v| v * v).sum();
        let y2: f64 = y.iter().map(|v| v * v).sum();
        cost += (p2 + y2) * cfg.dt;
        for _ in 0..cfg.noise_substeps {
            for yi in y.iter_mut() {
                let z: f64 = rng.sample(StandardNormal);
                *yi += sub_scale * z;
            }
        }
        for (yi, pi) in y.iter_mut().zip(&p) {
            *yi += pi * cfg.dt;
        }
        steps += 1;
        if !(y.iter().all(|v| v.is_finite()) && cost.is_finite()) {
            return Err(Error::SimulationDiverged {
                path: path_index,
                step: steps,
            });
        }
        exited = norm(&y) >= radius;
        if let (Some(tr), Some(every)) = (trace.as_mut(), cfg.trace_every) {
            if steps.is_multiple_of(every) || exited || steps == cfg.max_steps {
                tr.push(TracePoint {
                    t: steps as f64 * cfg.dt,
                    y: y.clone(),
                    cost,
                });
            }
        }
    }

    Ok(PathResult {
        tau: steps as f64 * cfg.dt,
        cost,
        exited,
        steps,
        final_state: y,
        path_trace: trace,
    })
}

/// Monte Carlo statistics over the exited paths.
#[derive(Debug, Clone, PartialEq)]
pub struct McSummary {
    /// Mean cost over exited paths (`NaN` when none exited).
    pub mean: f64,
    /// Standard error of `mean` (`NaN` with fewer than two exits).
    pub stderr: f64,
    pub n_exited: u64,
    pub n_paths: u64,
    pub dt: f64,
    pub seed: u64,
    /// Mean exit time over exited paths.
    pub mean_tau: f64,
}

impl McSummary {
    pub const CSV_HEADER: &'static str = "mean,stderr,n_exited,n_paths,dt,seed";

    /// CSV `mean,stderr,n_exited,n_paths,dt,seed` with header.
    pub fn to_csv(&self) -> String {
        format!(
            "{}\n{},{},{},{},{},{}\n",
            Self::CSV_HEADER,
            fmt_f64(self.mean),
            fmt_f64(self.stderr),
            self.n_exited,
            self.n_paths,
            fmt_f64(self.dt),
            self.seed
        )
    }
}

/// Run every path and reduce in path order. Never fails for lack of exits;
/// see [`monte_carlo_cost`] for the strict form.
pub fn monte_carlo<F: FeedbackLaw + ?Sized>(law: &F, cfg: &SimConfig) -> Result<McSummary> {
    cfg.validate(law.params())?;
    let untraced = SimConfig {
        trace_every: None,
        ..cfg.clone()
    };
    let results: Vec<Result<(bool, f64, f64)>> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|i| euler_path(law, &untraced, i).map(|r| (r.exited, r.cost, r.tau)))
        .collect();

    let mut n = 0u64;
    let mut mean = 0.0;
    let mut m2 = 0.0;
    let mut tau_sum = 0.0;
    for res in results {
        let (exited, cost, tau) = res?;
        if !exited {
            continue;
        }
        n += 1;
        let delta = cost - mean;
        mean += delta / n as f64;
        m2 += delta * (cost - mean);
        tau_sum += tau;
    }
    let (mean, stderr, mean_tau) = match n {
        0 => (f64::NAN, f64::NAN, f64::NAN),
        1 => (mean, f64::NAN, tau_sum),
        _ => (
            mean,
            (m2 / (n - 1) as f64 / n as f64).sqrt(),
            tau_sum / n as f64,
        ),
    };
    Ok(McSummary {
        mean,
        stderr,
        n_exited: n,
        n_paths: cfg.n_paths,
        dt: cfg.dt,
        seed: cfg.seed,
        mean_tau,
    })
}

/// Mean and standard error of the cost over exited paths.
pub fn monte_carlo_cost<F: FeedbackLaw + ?Sized>(law: &F, cfg: &SimConfig) -> Result<McSummary> {
    if cfg.n_paths < 2 {
        return Err(Error::InvalidParams("n_paths must be >= 2".into()));
    }
    let summary = monte_carlo(law, cfg)?;
    if summary.n_exited == 0 {
        return Err(Error::NoExits {
            n_paths: cfg.n_paths,
            max_steps: cfg.max_steps,
        });
    }
    Ok(summary)
}
