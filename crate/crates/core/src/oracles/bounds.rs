//! Pointwise checks of the growth and rate bounds on a kernel.
//!
//! Each margin is relative to its bound, so `margin >= 0` means the bound holds
//! and the value stays meaningful when `u` itself overflows:
//!
//! | bound                | margin                                             |
//! |----------------------|----------------------------------------------------|
//! | `u_exp_bound`        | `1 - u / (alpha e^{x/(N+2)})`                      |
//! | `u_prime_exp_bound`  | `1 - u' / (alpha r^3 e^{x/(N+2)} / (sigma^4 (N+2)))` |
//! | `rate_le_one`        | `1 - sigma^2 u' / (r u)`                           |
//! | `rate_envelope`      | `1 - rho / upper envelope`                         |
//! | `rate_lower_envelope`| `rho - lower envelope`                             |

use super::validate_grid;
use crate::error::{Error, Result};
use crate::rate::{rate_lower_envelope, rate_upper_envelope};
use crate::report::fmt_f64;
use crate::series::SeriesKernel;

/// Smallest margin accepted as "bound holds".
pub const BOUND_SLACK: f64 = -1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundKind {
    UExp,
    UPrimeExp,
    RateLeOne,
    RateEnvelope,
    RateLowerEnvelope,
}

impl BoundKind {
    pub const ALL: [BoundKind; 5] = [
        BoundKind::UExp,
        BoundKind::UPrimeExp,
        BoundKind::RateLeOne,
        BoundKind::RateEnvelope,
        BoundKind::RateLowerEnvelope,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::UExp => "u_exp_bound",
            Self::UPrimeExp => "u_prime_exp_bound",
            Self::RateLeOne => "rate_le_one",
            Self::RateEnvelope => "rate_envelope",
            Self::RateLowerEnvelope => "rate_lower_envelope",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundMargin {
    pub r: f64,
    pub bound: BoundKind,
    pub margin: f64,
}

#[derive(Debug, Clone)]
pub struct BoundsReport {
    pub rows: Vec<BoundMargin>,
}

impl BoundsReport {
    pub fn worst(&self, bound: BoundKind) -> Option<&BoundMargin> {
        self.rows
            .iter()
            .filter(|m| m.bound == bound)
            .min_by(|a, b| a.margin.total_cmp(&b.margin))
    }

    pub fn violations(&self) -> impl Iterator<Item = &BoundMargin> {
        self.rows.iter().filter(|m| m.margin.is_nan() || m.margin < BOUND_SLACK)
    }

    /// `Err(BoundViolation)` naming the first violated bound.
    pub fn ensure(&self) -> Result<()> {
        match self.violations().next() {
            None => Ok(()),
            Some(m) => Err(Error::BoundViolation {
                bound: m.bound.name(),
                r: m.r,
                margin: m.margin,
            }),
        }
    }

    /// CSV with header `r,bound_name,margin`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("r,bound_name,margin\n");
        for m in &self.rows {
            out.push_str(&format!("{},{},{}\n", fmt_f64(m.r), m.bound.name(), fmt_f64(m.margin)));
        }
        out
    }

    pub fn summary(&self) -> String {
        let mut out = String::new();
        for kind in BoundKind::ALL {
            if let Some(w) = self.worst(kind) {
                let status = if w.margin >= BOUND_SLACK { "ok" } else { "VIOLATED" };
                out.push_str(&format!(
                    "{:<20} worst margin {:>12.4e} at r = {:.6}  {}\n",
                    kind.name(),
                    w.margin,
                    w.r,
                    status
                ));
            }
        }
        out
    }
}

/// Evaluate every bound at every grid point. Fails only on invalid input; use
/// [`BoundsReport::ensure`] to turn violations into an error.
pub fn check_bounds(kernel: &SeriesKernel, grid: &[f64]) -> Result<BoundsReport> {
    if grid.is_empty() {
        return Err(Error::InvalidGrid("empty grid".into()));
    }
    if grid.len() > 1 {
        validate_grid(grid, grid[0] == 0.0)?;
    }
    let params = kernel.params();
    let n2 = params.n() + 2.0;
    let s2 = params.sigma() * params.sigma();
    let log_alpha = params.alpha().ln();
    let mut rows = Vec::with_capacity(grid.len() * BoundKind::ALL.len());
    for &r in grid {
        let mut push = |bound, margin| rows.push(BoundMargin { r, bound, margin });
        if r == 0.0 {
            // u = alpha, u' = 0 and the rate vanishes: every bound is tight or trivial.
            let u0 = kernel.eval_u(0.0)?;
            push(BoundKind::UExp, 1.0 - u0 / params.alpha());
            push(BoundKind::UPrimeExp, -kernel.eval_u_prime(0.0)?);
            push(BoundKind::RateLeOne, 1.0);
            push(BoundKind::RateEnvelope, 0.0);
            push(BoundKind::RateLowerEnvelope, 0.0);
            continue;
        }
        let x = params.expansion_var(r);
        let log_u = kernel.eval_log_u(r)?;
        let log_du = kernel.eval_log_u_prime(r)?;
        push(BoundKind::UExp, 1.0 - (log_u - log_alpha - x / n2).exp());
        let log_slope_bound = log_alpha + 3.0 * r.ln() - (s2 * s2 * n2).ln() + x / n2;
        push(BoundKind::UPrimeExp, 1.0 - (log_du - log_slope_bound).exp());

        let rho = kernel.direct_rate(r)?;
        push(BoundKind::RateLeOne, 1.0 - rho);
        let upper = rate_upper_envelope(params, r);
        push(BoundKind::RateEnvelope, 1.0 - rho / upper);
        push(BoundKind::RateLowerEnvelope, rho - rate_lower_envelope(params, r));
    }
    Ok(BoundsReport { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::uniform_grid;
    use crate::params::ModelParams;

    fn kernel(n: usize, sigma: f64, radius: f64) -> SeriesKernel {
        let p = ModelParams::new(n, sigma, radius).unwrap();
        SeriesKernel::build(p, 1e-15, radius).unwrap()
    }

    #[test]
    fn origin_is_tight() {
        let rep = check_bounds(&kernel(2, 1.0, 1.0), &[0.0]).unwrap();
        assert_eq!(rep.worst(BoundKind::UExp).unwrap().margin, 0.0);
        assert!(rep.ensure().is_ok());
    }

    #[test]
    fn reference_point_margin() {
        // u(1) = 1.0634834 against e^{1/16} = 1.0644945 for N = 2, sigma = 1.
        let rep = check_bounds(&kernel(2, 1.0, 1.0), &[0.0, 1.0]).unwrap();
        let m = rep
            .rows
            .iter()
            .find(|m| m.r == 1.0 && m.bound == BoundKind::UExp)
            .unwrap();
        let expected = 1.0 - 1.063_483_370_741_323_5 / (1.0f64 / 16.0).exp();
        assert!((m.margin - expected).abs() < 1e-14);
    }

    #[test]
    fn many_goods_small_sigma() {
        let grid = uniform_grid(0.0, 2.0, 200);
        let rep = check_bounds(&kernel(100, 0.5, 2.0), &grid).unwrap();
        assert_eq!(rep.violations().count(), 0, "{}", rep.summary());
    }

    #[test]
    fn corrupted_kernel_is_flagged() {
        let mut k = kernel(2, 1.0, 2.0);
        k.corrupt_coefficient(1, 8.0);
        let rep = check_bounds(&k, &uniform_grid(0.0, 2.0, 50)).unwrap();
        let err = rep.ensure().unwrap_err();
        assert!(err.to_string().starts_with("bound violation"), "{err}");
    }

    #[test]
    fn csv_layout() {
        let rep = check_bounds(&kernel(2, 1.0, 1.0), &[0.0, 0.5]).unwrap();
        let csv = rep.to_csv();
        assert!(csv.starts_with("r,bound_name,margin\n"));
        assert_eq!(csv.lines().count(), 1 + 2 * BoundKind::ALL.len());
    }
}
