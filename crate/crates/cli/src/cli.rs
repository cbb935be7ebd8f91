//! Command-line definitions and dispatch.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use hjb_planner_core::report::fmt_f64;
use hjb_planner_core::simulate::{default_dt, SimConfig};
use hjb_planner_core::{ModelParams, RateSeries, SeriesKernel, DEFAULT_TERM_TOL, DEFAULT_X_SWITCH};

use crate::config::{parse_bool, parse_list, parse_one, pick, ConfigFile};
use crate::grid::parse_grid;
use crate::output::write_atomic;
use crate::simulate_cmd::{run_simulation, write_outputs};
use crate::sweep::{sweep_rate, SweepSpec};
use crate::verify::{run_verify, VerifySet};

#[derive(Debug, Parser)]
#[command(name = "hjb-planner", version, about = "Optimal production rates for N-goods stochastic production planning")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the production-rate coefficient at --r or over --r-grid.
    Rate(Common),
    /// Rate table over lists of N and sigma and an r grid.
    Sweep(Common),
    /// Monte Carlo simulation of the optimally controlled inventory.
    Simulate(Common),
    /// Run the oracle verification suite.
    Verify(VerifyArgs),
    /// Expected optimal cost from |y| = --r0 until exit at --radius.
    Cost(Common),
}

/// Flags shared by every subcommand. Values come from the flag, then the
/// `--config` file, then the subcommand default.
#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// key = value file with defaults for any of the flags below
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// number of goods (comma list for sweep and verify)
    #[arg(long)]
    pub n: Option<String>,
    /// diffusion coefficient (comma list for sweep and verify)
    #[arg(long)]
    pub sigma: Option<String>,
    /// stopping radius R (comma list for verify)
    #[arg(long)]
    pub radius: Option<String>,
    /// radial grid min:max:steps
    #[arg(long = "r-grid")]
    pub r_grid: Option<String>,
    /// time step
    #[arg(long)]
    pub dt: Option<String>,
    /// number of Monte Carlo paths
    #[arg(long)]
    pub paths: Option<String>,
    /// RNG seed
    #[arg(long)]
    pub seed: Option<String>,
    /// output directory
    #[arg(long)]
    pub out: Option<String>,
    /// also write per-path trace CSVs
    #[arg(long)]
    pub trace: bool,
    /// step cap per path
    #[arg(long = "max-steps")]
    pub max_steps: Option<String>,
    /// initial inventory, comma list of N values (default 0)
    #[arg(long)]
    pub y0: Option<String>,
    /// single radius for `rate`
    #[arg(long)]
    pub r: Option<String>,
    /// start radius for `cost`
    #[arg(long)]
    pub r0: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long = "inject-fault", hide = true)]
    pub inject_fault: bool,
}

struct Inputs {
    common: Common,
    file: Option<ConfigFile>,
}

impl Inputs {
    fn new(common: Common) -> Result<Self> {
        let file = common.config.as_deref().map(ConfigFile::load).transpose()?;
        Ok(Self { common, file })
    }

    fn get(&self, key: &str) -> Option<String> {
        let c = &self.common;
        let flag = match key {
            "n" => c.n.as_ref(),
            "sigma" => c.sigma.as_ref(),
            "radius" => c.radius.as_ref(),
            "r_grid" => c.r_grid.as_ref(),
            "dt" => c.dt.as_ref(),
            "paths" => c.paths.as_ref(),
            "seed" => c.seed.as_ref(),
            "out" => c.out.as_ref(),
            "max_steps" => c.max_steps.as_ref(),
            "y0" => c.y0.as_ref(),
            "r" => c.r.as_ref(),
            "r0" => c.r0.as_ref(),
            _ => None,
        };
        pick(flag, self.file.as_ref(), key)
    }

    fn one<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        self.get(key).map_or(Ok(default), |v| parse_one(&v, key))
    }

    fn list<T: std::str::FromStr>(&self, key: &str, default: Vec<T>) -> Result<Vec<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.get(key).map_or(Ok(default), |v| parse_list(&v, key))
    }

    fn trace(&self) -> Result<bool> {
        if self.common.trace {
            return Ok(true);
        }
        self.file
            .as_ref()
            .and_then(|f| f.get("trace"))
            .map_or(Ok(false), parse_bool)
    }

    fn out_dir(&self, default: &str) -> PathBuf {
        PathBuf::from(self.get("out").unwrap_or_else(|| default.to_string()))
    }
}

fn build_rate(n: usize, sigma: f64, radius: f64, r_max: f64) -> Result<RateSeries> {
    let params = ModelParams::new(n, sigma, radius)?;
    let kernel = SeriesKernel::build(params, DEFAULT_TERM_TOL, r_max.max(radius))?;
    Ok(RateSeries::build(&kernel, DEFAULT_X_SWITCH)?)
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Rate(c) => cmd_rate(Inputs::new(c)?),
        Command::Sweep(c) => cmd_sweep(Inputs::new(c)?),
        Command::Simulate(c) => cmd_simulate(Inputs::new(c)?),
        Command::Verify(v) => cmd_verify(Inputs::new(v.common)?, v.inject_fault),
        Command::Cost(c) => cmd_cost(Inputs::new(c)?),
    }
}

fn cmd_rate(inp: Inputs) -> Result<()> {
    let n = inp.one("n", 2usize)?;
    let sigma = inp.one("sigma", 1.0)?;
    let radii = match (inp.get("r"), inp.get("r_grid")) {
        (Some(r), _) => parse_list::<f64>(&r, "r")?,
        (None, Some(g)) => parse_grid(&g)?,
        (None, None) => bail!("rate needs --r or --r-grid"),
    };
    let r_max = radii.iter().copied().fold(0.0, f64::max);
    let radius = inp.one("radius", r_max.max(f64::MIN_POSITIVE))?;
    let rate = build_rate(n, sigma, radius, r_max)?;
    print!("{}", rate.rate_table_csv(&radii)?);
    Ok(())
}

fn cmd_cost(inp: Inputs) -> Result<()> {
    let n = inp.one("n", 2usize)?;
    let sigma = inp.one("sigma", 1.0)?;
    let radius = inp.one("radius", 1.0)?;
    let r0 = inp.one("r0", 0.0)?;
    let params = ModelParams::new(n, sigma, radius)?;
    let kernel = SeriesKernel::build(params, DEFAULT_TERM_TOL, radius)?;
    let cost = kernel.expected_optimal_cost(r0)?;
    println!("r0,radius,expected_cost");
    println!("{},{},{}", fmt_f64(r0), fmt_f64(radius), fmt_f64(cost));
    Ok(())
}

fn cmd_sweep(inp: Inputs) -> Result<()> {
    let spec = SweepSpec {
        n_list: inp.list("n", vec![2usize, 10, 100])?,
        sigma_list: inp.list("sigma", vec![0.5, 1.0, 2.0])?,
        r_grid: parse_grid(&inp.get("r_grid").unwrap_or_else(|| "0:5:100".into()))?,
        output_dir: inp.out_dir("sweep_out"),
    };
    let table = sweep_rate(&spec);
    let csv = write_atomic(&spec.output_dir.join("sweep.csv"), &table.to_csv())?;
    let svg = write_atomic(&spec.output_dir.join("sweep.svg"), &table.chart().render())?;
    for e in &table.errors {
        eprintln!("cell error: {e}");
    }
    let violations = table.monotonicity_violations();
    for v in &violations {
        eprintln!("monotonicity: {v}");
    }
    println!(
        "{} cells, {} errors, {} monotonicity violations",
        table.rows.len(),
        table.errors.len(),
        violations.len()
    );
    println!("wrote {}", csv.display());
    println!("wrote {}", svg.display());
    Ok(())
}

fn cmd_simulate(inp: Inputs) -> Result<()> {
    let n = inp.one("n", 2usize)?;
    let sigma = inp.one("sigma", 1.0)?;
    let radius = inp.one("radius", 1.0)?;
    let params = ModelParams::new(n, sigma, radius)?;
    let y0 = inp.list("y0", vec![0.0; n])?;
    let cfg = SimConfig::new(
        inp.one("dt", default_dt(&params))?,
        inp.one("max_steps", 10_000_000u64)?,
        inp.one("paths", 1000u64)?,
        inp.one("seed", 0u64)?,
        y0,
    );
    cfg.validate(&params)?;
    let rate = build_rate(n, sigma, radius, radius)?;
    let out = run_simulation(&rate, &cfg)?;
    let title = format!("|y(t)|, N={n}, sigma={sigma}, R={radius}, seed={}", cfg.seed);
    let files = write_outputs(&inp.out_dir("simulate_out"), &out, radius, title, inp.trace()?)?;

    let r0 = hjb_planner_core::math::norm(&cfg.y0).min(radius);
    let expected = rate.kernel().expected_optimal_cost(r0)?;
    let s = &out.summary;
    println!("seed {}: {} of {} paths exited", s.seed, s.n_exited, s.n_paths);
    println!("mean cost {} +- {} (closed form {})", fmt_f64(s.mean), fmt_f64(s.stderr), fmt_f64(expected));
    for f in files {
        println!("wrote {}", f.display());
    }
    Ok(())
}

fn cmd_verify(inp: Inputs, inject_fault: bool) -> Result<()> {
    let defaults = VerifySet::default();
    let set = VerifySet {
        n_list: inp.list("n", defaults.n_list.clone())?,
        sigma_list: inp.list("sigma", defaults.sigma_list.clone())?,
        radius_list: inp.list("radius", defaults.radius_list.clone())?,
        inject_fault,
        ..defaults
    };
    let dir = inp.out_dir("verify_out");
    let report = run_verify(&set);
    let write = |name: &str, text: &str| -> Result<PathBuf> { write_atomic(&dir.join(name), text) };
    write("bounds.csv", &report.bounds_csv)?;
    write("equivalence.csv", &report.equivalence_csv)?;
    write("picard.csv", &report.picard_csv)?;
    write("exact4d.csv", &report.exact4d_csv)?;
    write("summary.txt", &report.summary())?;
    print!("{}", report.summary());
    println!("reports in {}", dir.display());
    if let Some(first) = report.failures().next() {
        bail!(
            "verification failed ({} checks): {}: {}",
            report.failures().count(),
            first.name,
            first.detail
        );
    }
    Ok(())
}

/// Size the global thread pool from `HJB_PLANNER_THREADS` when set.
pub fn init_threads() -> Result<()> {
    if let Ok(v) = std::env::var("HJB_PLANNER_THREADS") {
        let threads: usize = v
            .trim()
            .parse()
            .with_context(|| format!("HJB_PLANNER_THREADS={v:?}"))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .context("configuring thread pool")?;
    }
    Ok(())
}

