//! Rate sweeps over `N x sigma x r`.

use std::path::PathBuf;

use hjb_planner_core::report::fmt_f64;
use hjb_planner_core::{ModelParams, RateSeries, SeriesKernel, DEFAULT_TERM_TOL, DEFAULT_X_SWITCH};
use rayon::prelude::*;

use crate::svg::{Chart, Series};

/// Slack on the monotonicity checks.
pub const MONOTONE_SLACK: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub n_list: Vec<usize>,
    pub sigma_list: Vec<f64>,
    pub r_grid: Vec<f64>,
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub n: usize,
    pub sigma: f64,
    pub r: f64,
    /// `None` when the cell could not be evaluated.
    pub rate: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct SweepTable {
    pub spec: SweepSpec,
    /// Rows ordered by `N`, then `sigma`, then `r`, in the order given by the [`SweepSpec`].
    pub rows: Vec<SweepRow>,
    /// One message per failed cell or slice.
    pub errors: Vec<String>,
}

fn build_rate(n: usize, sigma: f64, r_max: f64) -> hjb_planner_core::Result<RateSeries> {
    let r_max = r_max.max(f64::MIN_POSITIVE);
    let params = ModelParams::new(n, sigma, r_max)?;
    let kernel = SeriesKernel::build(params, DEFAULT_TERM_TOL, r_max)?;
    RateSeries::build(&kernel, DEFAULT_X_SWITCH)
}

pub fn sweep_rate(spec: &SweepSpec) -> SweepTable {
    let r_max = spec.r_grid.iter().copied().fold(0.0, f64::max);
    let slices: Vec<(usize, f64)> = spec
        .n_list
        .iter()
        .flat_map(|&n| spec.sigma_list.iter().map(move |&s| (n, s)))
        .collect();
    let results: Vec<(Vec<SweepRow>, Vec<String>)> = slices
        .par_iter()
        .map(|&(n, sigma)| {
            let mut errors = Vec::new();
            let rate = build_rate(n, sigma, r_max)
                .map_err(|e| errors.push(format!("N={n} sigma={sigma}: {e}")))
                .ok();
            let rows = spec
                .r_grid
                .iter()
                .map(|&r| {
                    let value = rate.as_ref().and_then(|rs| match rs.rate_coeff(r) {
                        Ok(v) => Some(v),
                        Err(e) => {
                            errors.push(format!("N={n} sigma={sigma} r={r}: {e}"));
                            None
                        }
                    });
                    SweepRow { n, sigma, r, rate: value }
                })
                .collect();
            (rows, errors)
        })
        .collect();
    let mut rows = Vec::new();
    let mut errors = Vec::new();
    for (r, e) in results {
        rows.extend(r);
        errors.extend(e);
    }
    SweepTable {
        spec: spec.clone(),
        rows,
        errors,
    }
}

impl SweepTable {
    pub const CSV_HEADER: &'static str = "N,sigma,r,rate";

    /// CSV `N,sigma,r,rate`; failed cells have an empty `rate`.
    pub fn to_csv(&self) -> String {
        let mut out = format!("{}\n", Self::CSV_HEADER);
        for row in &self.rows {
            let rate = row.rate.map(fmt_f64).unwrap_or_default();
            out.push_str(&format!("{},{},{},{}\n", row.n, fmt_f64(row.sigma), fmt_f64(row.r), rate));
        }
        out
    }

    fn get(&self, ni: usize, si: usize, ri: usize) -> Option<f64> {
        let ns = self.spec.sigma_list.len();
        let nr = self.spec.r_grid.len();
        self.rows[(ni * ns + si) * nr + ri].rate
    }

    /// Violations of: nondecreasing in `r` per `(N, sigma)`; nonincreasing in
    /// `N` per `(sigma, r)` and nonincreasing in `sigma` per `(N, r)`, for
    /// `r > 0`. The axes are compared in the order they are listed once sorted.
    pub fn monotonicity_violations(&self) -> Vec<String> {
        let spec = &self.spec;
        let mut out = Vec::new();
        let order = |v: &[f64]| {
            let mut idx: Vec<usize> = (0..v.len()).collect();
            idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
            idx
        };
        let n_as_f: Vec<f64> = spec.n_list.iter().map(|&n| n as f64).collect();
        let n_order = order(&n_as_f);
        let s_order = order(&spec.sigma_list);
        let r_order = order(&spec.r_grid);
        let pairs = |o: &[usize]| o.windows(2).map(|w| (w[0], w[1])).collect::<Vec<_>>();

        for ni in 0..spec.n_list.len() {
            for si in 0..spec.sigma_list.len() {
                for (a, b) in pairs(&r_order) {
                    if let (Some(lo), Some(hi)) = (self.get(ni, si, a), self.get(ni, si, b)) {
                        if hi - lo < -MONOTONE_SLACK {
                            out.push(format!(
                                "rate decreases in r: N={} sigma={} r={} -> {}",
                                spec.n_list[ni], spec.sigma_list[si], spec.r_grid[a], spec.r_grid[b]
                            ));
                        }
                    }
                }
            }
        }
        for ri in 0..spec.r_grid.len() {
            if spec.r_grid[ri] <= 0.0 {
                continue;
            }
            for si in 0..spec.sigma_list.len() {
                for (a, b) in pairs(&n_order) {
                    if let (Some(lo), Some(hi)) = (self.get(a, si, ri), self.get(b, si, ri)) {
                        if hi - lo > MONOTONE_SLACK && spec.n_list[a] != spec.n_list[b] {
                            out.push(format!(
                                "rate increases in N: sigma={} r={} N={} -> {}",
                                spec.sigma_list[si], spec.r_grid[ri], spec.n_list[a], spec.n_list[b]
                            ));
                        }
                    }
                }
            }
            for ni in 0..spec.n_list.len() {
                for (a, b) in pairs(&s_order) {
                    if let (Some(lo), Some(hi)) = (self.get(ni, a, ri), self.get(ni, b, ri)) {
                        if hi - lo > MONOTONE_SLACK && spec.sigma_list[a] != spec.sigma_list[b] {
                            out.push(format!(
                                "rate increases in sigma: N={} r={} sigma={} -> {}",
                                spec.n_list[ni], spec.r_grid[ri], spec.sigma_list[a], spec.sigma_list[b]
                            ));
                        }
                    }
                }
            }
        }
        out
    }

    /// Rate against `r`, one curve per `(N, sigma)`, with the asymptote 1.
    pub fn chart(&self) -> Chart {
        let nr = self.spec.r_grid.len();
        let series = self
            .rows
            .chunks(nr)
            .map(|chunk| Series {
                label: format!("N={} sigma={}", chunk[0].n, chunk[0].sigma),
                points: chunk
                    .iter()
                    .filter_map(|row| row.rate.map(|v| (row.r, v)))
                    .collect(),
            })
            .collect();
        Chart {
            title: "production rate coefficient".into(),
            x_label: "r = |y|".into(),
            y_label: "rate".into(),
            series,
            rules: vec![(1.0, "1".into())],
        }
    }
}
