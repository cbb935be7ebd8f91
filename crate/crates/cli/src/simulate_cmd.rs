//! `simulate`: Monte Carlo summary, optional path traces and an `|y(t)|` plot.

use std::path::Path;

use anyhow::{Context, Result};
use hjb_planner_core::math::norm;
use hjb_planner_core::simulate::{euler_path, monte_carlo, McSummary, PathResult, SimConfig};
use hjb_planner_core::RateSeries;
use rayon::prelude::*;

use crate::output::write_atomic;
use crate::svg::{Chart, Series};

/// Paths drawn in the SVG (and dumped with `--trace`).
pub const PLOTTED_PATHS: u64 = 8;
const MAX_TRACE_POINTS: u64 = 100_000;
const MAX_PLOT_POINTS: usize = 2_000;

pub struct SimulateOutput {
    pub summary: McSummary,
    pub traces: Vec<PathResult>,
}

pub fn run_simulation(rate: &RateSeries, cfg: &SimConfig) -> Result<SimulateOutput> {
    let summary = monte_carlo(rate, cfg).context("running Monte Carlo")?;
    let traced = SimConfig {
        trace_every: Some((cfg.max_steps / MAX_TRACE_POINTS).max(1)),
        ..cfg.clone()
    };
    let traces = (0..cfg.n_paths.min(PLOTTED_PATHS))
        .into_par_iter()
        .map(|i| euler_path(rate, &traced, i))
        .collect::<Result<Vec<_>, _>>()
        .context("tracing sample paths")?;
    Ok(SimulateOutput { summary, traces })
}

pub fn paths_chart(traces: &[PathResult], radius: f64, title: String) -> Chart {
    let series = traces
        .iter()
        .enumerate()
        .map(|(i, path)| {
            let pts = path.path_trace.as_deref().unwrap_or_default();
            let stride = pts.len().div_ceil(MAX_PLOT_POINTS).max(1);
            let mut points: Vec<(f64, f64)> = pts
                .iter()
                .step_by(stride)
                .map(|p| (p.t, norm(&p.y)))
                .collect();
            if let Some(last) = pts.last() {
                if pts.len() > 1 && (pts.len() - 1) % stride != 0 {
                    points.push((last.t, norm(&last.y)));
                }
            }
            Series {
                label: format!("path {i}"),
                points,
            }
        })
        .collect();
    Chart {
        title,
        x_label: "t".into(),
        y_label: "|y(t)|".into(),
        series,
        rules: vec![(radius, "R".into())],
    }
}

pub fn write_outputs(out_dir: &Path, out: &SimulateOutput, radius: f64, title: String, trace: bool) -> Result<Vec<std::path::PathBuf>> {
    let mut written = vec![write_atomic(&out_dir.join("summary.csv"), &out.summary.to_csv())?];
    written.push(write_atomic(
        &out_dir.join("paths.svg"),
        &paths_chart(&out.traces, radius, title).render(),
    )?);
    if trace {
        for (i, path) in out.traces.iter().enumerate() {
            written.push(write_atomic(&out_dir.join(format!("trace_{i:03}.csv")), &path.trace_csv())?);
        }
    }
    Ok(written)
}
