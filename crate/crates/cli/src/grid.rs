//! `min:max:steps` radial grids.

use anyhow::{bail, Context, Result};
use hjb_planner_core::math::uniform_grid;

/// `steps` equal intervals from `min` to `max` (so `steps + 1` points).
/// `min:max:0` is allowed only when `min == max` and yields one point.
pub fn parse_grid(text: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = text.split(':').collect();
    let [lo, hi, steps] = parts[..] else {
        bail!("grid must be min:max:steps, got {text:?}");
    };
    let lo: f64 = lo.trim().parse().with_context(|| format!("grid min {lo:?}"))?;
    let hi: f64 = hi.trim().parse().with_context(|| format!("grid max {hi:?}"))?;
    let steps: usize = steps.trim().parse().with_context(|| format!("grid steps {steps:?}"))?;
    if !(lo.is_finite() && hi.is_finite()) || lo < 0.0 || hi < lo {
        bail!("grid needs 0 <= min <= max, got {text:?}");
    }
    if steps == 0 {
        if lo != hi {
            bail!("grid with 0 steps needs min == max");
        }
        return Ok(vec![lo]);
    }
    if lo == hi {
        bail!("grid with min == max needs 0 steps");
    }
    Ok(uniform_grid(lo, hi, steps + 1))
}
