//! Experiment harness for `hjb-planner-core`: rate queries and sweeps, Monte
//! Carlo simulation, oracle verification, with CSV and SVG output.

pub mod cli;
pub mod config;
pub mod grid;
pub mod output;
pub mod simulate_cmd;
pub mod svg;
pub mod sweep;
pub mod verify;

pub use cli::{init_threads, run, Cli};
