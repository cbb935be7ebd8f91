//! Oracle verification suite: bound checks, series/Picard/ODE agreement,
//! Picard convergence bounds, rate monotonicity and the exact 4-D fixtures.

use hjb_planner_core::math::uniform_grid;
use hjb_planner_core::oracles::{
    check_bounds, ode_solve, picard_solve, verify_exact_4d, Exact4dBranch, EXACT_RESIDUAL_TOL,
    REFINE_TOL,
};
use hjb_planner_core::report::fmt_f64;
use hjb_planner_core::{ModelParams, RateSeries, SeriesKernel, DEFAULT_TERM_TOL, DEFAULT_X_SWITCH};
use rayon::prelude::*;

pub const EQUIVALENCE_TOL: f64 = 1e-8;
pub const MONOTONE_SLACK: f64 = 1e-12;
const PICARD_K_MAX: usize = 1000;
const PICARD_TOL: f64 = 1e-14;
const ODE_STEP_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct VerifySet {
    pub n_list: Vec<usize>,
    pub sigma_list: Vec<f64>,
    pub radius_list: Vec<f64>,
    pub grid_points: usize,
    pub exact_sigmas: Vec<f64>,
    /// Test hook: scale `a_1` of every kernel by 8 before checking.
    pub inject_fault: bool,
}

impl Default for VerifySet {
    fn default() -> Self {
        Self {
            n_list: vec![1, 2, 4, 10, 100],
            sigma_list: vec![0.5, 1.0, 2.0, 5.0],
            radius_list: vec![1.0, 2.0],
            grid_points: 200,
            exact_sigmas: vec![0.5, 1.0, 2.0],
            inject_fault: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Default)]
pub struct VerifyReport {
    pub checks: Vec<CheckOutcome>,
    pub bounds_csv: String,
    pub equivalence_csv: String,
    pub picard_csv: String,
    pub exact4d_csv: String,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckOutcome> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn summary(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            let status = if c.passed { "PASS" } else { "FAIL" };
            out.push_str(&format!("{status} {}: {}\n", c.name, c.detail));
        }
        let failed = self.failures().count();
        out.push_str(&format!("{} checks, {} failed\n", self.checks.len(), failed));
        out
    }
}

struct CaseResult {
    checks: Vec<CheckOutcome>,
    bounds: String,
    equivalence: String,
    picard: String,
}

fn check(name: String, result: Result<String, String>) -> CheckOutcome {
    match result {
        Ok(detail) => CheckOutcome { name, passed: true, detail },
        Err(detail) => CheckOutcome { name, passed: false, detail },
    }
}

fn run_case(n: usize, sigma: f64, radius: f64, points: usize, inject_fault: bool) -> CaseResult {
    let tag = format!("N={n} sigma={sigma} R={radius}");
    let prefix = format!("{n},{},{}", fmt_f64(sigma), fmt_f64(radius));
    let mut out = CaseResult {
        checks: Vec::new(),
        bounds: String::new(),
        equivalence: String::new(),
        picard: String::new(),
    };
    let grid = uniform_grid(0.0, radius, points);

    let kernel = ModelParams::new(n, sigma, radius)
        .and_then(|p| SeriesKernel::build(p, DEFAULT_TERM_TOL, radius))
        .map(|mut k| {
            if inject_fault {
                k.corrupt_coefficient(1, 8.0);
            }
            k
        });
    let kernel = match kernel {
        Ok(k) => k,
        Err(e) => {
            out.checks.push(check(format!("kernel {tag}"), Err(e.to_string())));
            return out;
        }
    };
    let params = *kernel.params();

    // bounds
    let bounds = check_bounds(&kernel, &grid).map_err(|e| e.to_string()).and_then(|rep| {
        for m in &rep.rows {
            out.bounds.push_str(&format!(
                "{prefix},{},{},{}\n",
                fmt_f64(m.r),
                m.bound.name(),
                fmt_f64(m.margin)
            ));
        }
        rep.ensure().map_err(|e| e.to_string())?;
        let worst = rep.rows.iter().map(|m| m.margin).fold(f64::INFINITY, f64::min);
        Ok(format!("worst margin {worst:.3e}"))
    });
    out.checks.push(check(format!("bounds {tag}"), bounds));

    // rate monotonicity
    let rate = RateSeries::build(&kernel, DEFAULT_X_SWITCH)
        .map_err(|e| e.to_string())
        .and_then(|rs| {
            let rho = grid
                .iter()
                .map(|&r| rs.rate_coeff(r))
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| e.to_string())?;
            let worst = rho.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
            if worst < -MONOTONE_SLACK {
                return Err(format!("rate decreases by {worst:e}"));
            }
            Ok(format!("smallest step {worst:.3e}, consistency gap {:.3e}", rs.consistency_gap()))
        });
    out.checks.push(check(format!("rate_monotone {tag}"), rate));

    // series vs Picard vs ODE
    let series: Result<Vec<f64>, String> = grid
        .iter()
        .map(|&r| kernel.eval_u(r).map_err(|e| e.to_string()))
        .collect();
    let picard = picard_solve(&params, &grid, PICARD_K_MAX, PICARD_TOL).map_err(|e| e.to_string());
    let ode = ode_solve(&params, &grid, ODE_STEP_TOL).map_err(|e| e.to_string());
    let equivalence = match (&series, &picard, &ode) {
        (Ok(s), Ok(p), Ok(o)) => {
            let rel = |a: f64, b: f64| (a - b).abs() / b.abs();
            let mut worst = [0.0_f64; 3];
            for i in 0..grid.len() {
                let (sv, pv, ov) = (s[i], p.solution.values[i], o.values[i]);
                worst[0] = worst[0].max(rel(pv, sv));
                worst[1] = worst[1].max(rel(ov, sv));
                worst[2] = worst[2].max(rel(pv, ov));
                out.equivalence.push_str(&format!(
                    "{prefix},{},{},{},{}\n",
                    fmt_f64(grid[i]),
                    fmt_f64(sv),
                    fmt_f64(pv),
                    fmt_f64(ov)
                ));
            }
            let detail = format!(
                "picard-series {:.2e}, ode-series {:.2e}, picard-ode {:.2e}",
                worst[0], worst[1], worst[2]
            );
            if worst.iter().all(|w| *w <= EQUIVALENCE_TOL) {
                Ok(detail)
            } else {
                Err(detail)
            }
        }
        _ => Err([&series.as_ref().err(), &picard.as_ref().err(), &ode.as_ref().err()]
            .iter()
            .filter_map(|e| e.map(String::as_str))
            .collect::<Vec<_>>()
            .join("; ")),
    };
    out.checks.push(check(format!("oracle_equivalence {tag}"), equivalence));

    // Picard convergence
    if let Ok(run) = &picard {
        let sup_u = run.solution.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        for (k, d) in run.sup_differences.iter().enumerate() {
            let bound = hjb_planner_core::oracles::picard_increment_bound(&params, k);
            out.picard.push_str(&format!("{prefix},{k},{},{}\n", fmt_f64(*d), fmt_f64(bound)));
        }
        let violations = run.increment_bound_violations(&params, REFINE_TOL * sup_u);
        let result = if !run.monotone {
            Err("iterates not monotone".to_string())
        } else if let Some((k, d, b)) = violations.first() {
            Err(format!("increment {d:e} exceeds bound {b:e} at k={k}"))
        } else {
            Ok(format!("{} iterations, {} subdivisions", run.iterations, run.subdivisions))
        };
        out.checks.push(check(format!("picard_bound {tag}"), result));
    }
    out
}

pub fn run_verify(set: &VerifySet) -> VerifyReport {
    let cases: Vec<(usize, f64, f64)> = set
        .n_list
        .iter()
        .flat_map(|&n| {
            set.sigma_list
                .iter()
                .flat_map(move |&s| set.radius_list.iter().map(move |&r| (n, s, r)))
        })
        .collect();
    let results: Vec<CaseResult> = cases
        .par_iter()
        .map(|&(n, s, r)| run_case(n, s, r, set.grid_points, set.inject_fault))
        .collect();

    let mut report = VerifyReport {
        bounds_csv: "N,sigma,R,r,bound_name,margin\n".into(),
        equivalence_csv: "N,sigma,R,r,series,picard,ode\n".into(),
        picard_csv: "N,sigma,R,k,sup_difference,bound\n".into(),
        exact4d_csv: "sigma,branch,r,u,residual\n".into(),
        ..Default::default()
    };
    for case in results {
        report.checks.extend(case.checks);
        report.bounds_csv.push_str(&case.bounds);
        report.equivalence_csv.push_str(&case.equivalence);
        report.picard_csv.push_str(&case.picard);
    }

    for &sigma in &set.exact_sigmas {
        for branch in [Exact4dBranch::Growing, Exact4dBranch::Decaying] {
            let name = format!("exact4d sigma={sigma} {}", branch.name());
            let result = verify_exact_4d(sigma, branch, &uniform_grid(0.1, 3.0, set.grid_points))
                .map_err(|e| e.to_string())
                .and_then(|rep| {
                    report.exact4d_csv.push_str(&rep.csv_rows());
                    let detail = format!("max scaled residual {:.3e}", rep.max_scaled_residual);
                    if rep.passes() {
                        Ok(detail)
                    } else {
                        Err(format!("{detail} > {EXACT_RESIDUAL_TOL:e}"))
                    }
                });
            report.checks.push(check(name, result));
        }
    }
    report
}
