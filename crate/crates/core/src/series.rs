//! Radial value-function kernel.
//!
//! The kernel is the positive radial solution of `u'' + (N-1)/r u' = r^2 u / sigma^4`
//! with `u(0) = 1`, expanded as an entire series in `x = r^4 / (4 sigma^4)`:
//!
//! ```text
//! u(r)  = sum_j a_j x^j,                   a_0 = 1,  a_j = a_{j-1} / (j (N + 4j - 2))
//! u'(r) = (r^3 / sigma^4) sum_{j>=1} j a_j x^{j-1}
//! ```
//!
//! `u` grows like `exp(r^2 / (2 sigma^2))`, so coefficients are stored as logs and
//! summed with log-sum-exp once `x > 1`. For `x <= 1` plain Horner evaluation is
//! used. The truncation order is fixed when the kernel is built, against the
//! largest radius the caller wants certified.

use crate::error::{Error, Result};
use crate::math::log_sum_exp;
use crate::params::ModelParams;

/// Default relative truncation tolerance.
pub const DEFAULT_TERM_TOL: f64 = 1e-15;

/// Default hard cap on the truncation order.
pub const DEFAULT_TRUNCATION_CAP: usize = 20_000;

/// Truncated coefficients of the kernel series, certified on `[0, r_max]`.
#[derive(Debug, Clone)]
pub struct SeriesKernel {
    params: ModelParams,
    log_a: Vec<f64>,
    // Plain coefficients for the Horner path; may underflow to zero for large j.
    a: Vec<f64>,
    term_tol: f64,
    r_max: f64,
}

impl SeriesKernel {
    /// Build a kernel certified on `[0, r_max]` with the default truncation cap.
    pub fn build(params: ModelParams, term_tol: f64, r_max: f64) -> Result<Self> {
        Self::build_with_cap(params, term_tol, r_max, DEFAULT_TRUNCATION_CAP)
    }

    /// Build a kernel, failing with [`Error::TruncationOverflow`] if more than
    /// `cap` terms would be needed.
    ///
    /// The first omitted term of both the `u` series and its derivative series
    /// must fall below `term_tol` times the respective partial sum at `r_max`.
    pub fn build_with_cap(
        params: ModelParams,
        term_tol: f64,
        r_max: f64,
        cap: usize,
    ) -> Result<Self> {
        if !(term_tol > 0.0 && term_tol < 1.0) {
            return Err(Error::InvalidParams(format!(
                "term_tol must lie in (0, 1), got {term_tol}"
            )));
        }
        if !(r_max.is_finite() && r_max >= params.radius()) {
            return Err(Error::InvalidParams(format!(
                "r_max = {r_max} must be finite and at least R = {}",
                params.radius()
            )));
        }
        let n = params.n();
        let log_x = params.expansion_var(r_max).ln();
        let ln_tol = term_tol.ln();

        let mut log_a = vec![0.0];
        let mut a = vec![1.0];
        // logs of the partial sums of u and of the derivative series at r_max,
        // terms 0..j-1
        let mut log_partial = 0.0_f64;
        let mut log_partial_deriv = f64::NEG_INFINITY;
        let mut j = 1usize;
        loop {
            let jf = j as f64;
            let denom = jf * (n + 4.0 * jf - 2.0);
            let la = log_a[j - 1] - jf.ln() - (n + 4.0 * jf - 2.0).ln();
            let log_term = la + jf * log_x;
            // Terms are decreasing from index j on once the ratio x / denom drops below one.
            let decreasing = log_x < denom.ln();
            let log_deriv_term = jf.ln() + log_term - log_x;
            if decreasing
                && log_term < ln_tol + log_partial
                && log_deriv_term < ln_tol + log_partial_deriv
            {
                break;
            }
            if j > cap {
                return Err(Error::TruncationOverflow { required: j, cap });
            }
            log_a.push(la);
            a.push(a[j - 1] / denom);
            log_partial = log_add(log_partial, log_term);
            log_partial_deriv = log_add(log_partial_deriv, log_deriv_term);
            j += 1;
        }

        Ok(Self {
            params,
            log_a,
            a,
            term_tol,
            r_max,
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    /// Highest retained index `J`.
    pub fn truncation_order(&self) -> usize {
        self.log_a.len() - 1
    }

    pub fn log_coefficients(&self) -> &[f64] {
        &self.log_a
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.a
    }

    pub fn term_tol(&self) -> f64 {
        self.term_tol
    }

    /// Upper end of the certified range.
    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub(crate) fn check_range(&self, r: f64) -> Result<()> {
        if r.is_finite() && (0.0..=self.r_max).contains(&r) {
            Ok(())
        } else {
            Err(Error::OutOfRange {
                r,
                r_max: self.r_max,
            })
        }
    }

    /// `u(r)`. Returns `+inf` where the value exceeds double range; use
    /// [`Self::eval_log_u`] there.
    pub fn eval_u(&self, r: f64) -> Result<f64> {
        self.check_range(r)?;
        if r == 0.0 {
            return Ok(self.params.alpha());
        }
        let x = self.params.expansion_var(r);
        let value = if x <= 1.0 {
            1.0 + x * self.horner_tail(x)
        } else {
            self.log_series(x).exp()
        };
        Ok(self.params.alpha() * value)
    }

    /// `ln u(r)`, finite on the whole certified range.
    pub fn eval_log_u(&self, r: f64) -> Result<f64> {
        self.check_range(r)?;
        if r == 0.0 {
            return Ok(self.params.alpha().ln());
        }
        let x = self.params.expansion_var(r);
        let log_series = if x <= 1.0 {
            (x * self.horner_tail(x)).ln_1p()
        } else {
            self.log_series(x)
        };
        Ok(self.params.alpha().ln() + log_series)
    }

    /// `u'(r)`, the term-by-term derivative of the kernel series.
    pub fn eval_u_prime(&self, r: f64) -> Result<f64> {
        self.check_range(r)?;
        if r == 0.0 {
            return Ok(0.0);
        }
        let x = self.params.expansion_var(r);
        if x <= 1.0 {
            Ok(self.params.alpha() * self.slope_prefactor(r) * self.horner_derivative(x))
        } else {
            Ok(self.eval_log_u_prime(r)?.exp())
        }
    }

    /// `ln u'(r)` for `r > 0`; `-inf` at the origin.
    pub fn eval_log_u_prime(&self, r: f64) -> Result<f64> {
        self.check_range(r)?;
        if r == 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        let x = self.params.expansion_var(r);
        let log_sum = if x <= 1.0 {
            self.horner_derivative(x).ln()
        } else {
            self.log_derivative_series(x)
        };
        Ok(self.params.alpha().ln() + self.slope_prefactor(r).ln() + log_sum)
    }

    /// Production-rate coefficient `sigma^2 u'(r) / (r u(r))` evaluated straight
    /// from the kernel series. Zero at the origin.
    pub fn direct_rate(&self, r: f64) -> Result<f64> {
        self.check_range(r)?;
        if r == 0.0 {
            return Ok(0.0);
        }
        let s2 = self.params.sigma() * self.params.sigma();
        let x = self.params.expansion_var(r);
        // sigma^2 u' / (r u) = (r^2 / sigma^2) * S'(x) / S(x)
        let scale = r * r / s2;
        if x <= 1.0 {
            Ok(scale * self.horner_derivative(x) / (1.0 + x * self.horner_tail(x)))
        } else {
            Ok(scale * (self.log_derivative_series(x) - self.log_series(x)).exp())
        }
    }

    /// Expected accumulated cost under the optimal control from `|y(0)| = r0`
    /// until the inventory norm reaches `R`: `2 sigma^2 (ln u(R) - ln u(r0))`.
    pub fn expected_optimal_cost(&self, r0: f64) -> Result<f64> {
        let radius = self.params.radius();
        if !r0.is_finite() || r0 < 0.0 {
            return Err(Error::InvalidParams(format!("r0 must be nonnegative, got {r0}")));
        }
        if r0 > radius {
            return Err(Error::StartBeyondBoundary { r0, radius });
        }
        let s2 = self.params.sigma() * self.params.sigma();
        let cost = 2.0 * s2 * (self.eval_log_u(radius)? - self.eval_log_u(r0)?);
        Ok(cost.max(0.0))
    }

    /// `r^3 / sigma^4`
    fn slope_prefactor(&self, r: f64) -> f64 {
        let s2 = self.params.sigma() * self.params.sigma();
        r * r * r / (s2 * s2)
    }

    /// `sum_{j>=1} a_j x^{j-1}` by Horner.
    fn horner_tail(&self, x: f64) -> f64 {
        self.a[1..].iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    /// `sum_{j>=1} j a_j x^{j-1}` by Horner.
    fn horner_derivative(&self, x: f64) -> f64 {
        self.a
            .iter()
            .enumerate()
            .skip(1)
            .rev()
            .fold(0.0, |acc, (j, &c)| acc * x + j as f64 * c)
    }

    /// `ln sum_j a_j x^j` by log-sum-exp.
    fn log_series(&self, x: f64) -> f64 {
        let lx = x.ln();
        log_sum_exp(
            self.log_a
                .iter()
                .enumerate()
                .map(|(j, &la)| la + j as f64 * lx),
        )
    }

    /// `ln sum_{j>=1} j a_j x^{j-1}` by log-sum-exp.
    fn log_derivative_series(&self, x: f64) -> f64 {
        let lx = x.ln();
        log_sum_exp(
            self.log_a
                .iter()
                .enumerate()
                .skip(1)
                .map(|(j, &la)| (j as f64).ln() + la + (j - 1) as f64 * lx),
        )
    }

    /// Multiply coefficient `j` by `factor`. Only used to check that the
    /// verification pipeline notices a corrupted kernel.
    #[doc(hidden)]
    pub fn corrupt_coefficient(&mut self, j: usize, factor: f64) {
        if let Some(c) = self.a.get_mut(j) {
            *c *= factor;
            self.log_a[j] += factor.ln();
        }
    }
}

fn log_add(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

#[cfg(test)]
mod tests {
    use super::*;

    // Reference values from 40-digit brute-force partial sums of the kernel
    // series, cross-checked against Gamma(nu+1) (s/2)^-nu I_nu(s) with
    // nu = (N-2)/4, s = r^2/(2 sigma^2).
    const U_N2_S1_R1: f64 = 1.063_483_370_741_323_5;
    const UP_N2_S1_R1: f64 = 0.257_894_305_390_896_3;
    const COST_N2_S1_R1: f64 = 0.123_099_438_370_962_61;

    fn kernel(n: usize, sigma: f64, radius: f64) -> SeriesKernel {
        let p = ModelParams::new(n, sigma, radius).unwrap();
        SeriesKernel::build(p, DEFAULT_TERM_TOL, radius).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
    }

    #[test]
    fn first_coefficients() {
        let p = ModelParams::new(2, 1.0, 3.0).unwrap();
        let k = SeriesKernel::build(p, 1e-15, 3.0).unwrap();
        let la = k.log_coefficients();
        assert_eq!(la[0], 0.0);
        assert!(rel(la[1], (0.25f64).ln()) < 1e-15);
        assert!(rel(la[2], (1.0f64 / 64.0).ln()) < 1e-15);

        let p = ModelParams::new(4, 1.0, 3.0).unwrap();
        let k = SeriesKernel::build(p, 1e-15, 3.0).unwrap();
        let a = k.coefficients();
        assert!(rel(a[1], 1.0 / 6.0) < 1e-15);
        assert!(rel(a[2], 1.0 / 120.0) < 1e-15);
    }

    #[test]
    fn recurrence_holds_in_log_space() {
        let k = kernel(7, 0.6, 2.5);
        let n = 7.0;
        for (j, w) in k.log_coefficients().windows(2).enumerate() {
            let j = (j + 1) as f64;
            let expected = w[0] - j.ln() - (n + 4.0 * j - 2.0).ln();
            assert_eq!(w[1], expected);
            assert!(w[1].is_finite());
        }
    }

    #[test]
    fn truncation_is_short_for_small_x() {
        // x = r^4 / (4 sigma^4) = 1 at r = sqrt(2) sigma; brute-force term
        // counting to 1e-16 stops by j = 9 for every N tested.
        for n in [1, 2, 4, 10, 100] {
            for sigma in [0.5, 1.0, 3.0] {
                let r_max = std::f64::consts::SQRT_2 * sigma;
                let p = ModelParams::new(n, sigma, r_max).unwrap();
                let k = SeriesKernel::build(p, 1e-16, r_max).unwrap();
                assert!(k.truncation_order() <= 10, "N={n} J={}", k.truncation_order());
            }
        }
    }

    #[test]
    fn truncation_cap_is_enforced() {
        let p = ModelParams::new(2, 0.1, 5.0).unwrap();
        let err = SeriesKernel::build_with_cap(p, 1e-15, 5.0, 50).unwrap_err();
        assert!(matches!(err, Error::TruncationOverflow { cap: 50, .. }));
    }

    #[test]
    fn rejects_bad_build_inputs() {
        let p = ModelParams::new(2, 1.0, 2.0).unwrap();
        assert!(SeriesKernel::build(p, 0.0, 2.0).is_err());
        assert!(SeriesKernel::build(p, 1.0, 2.0).is_err());
        assert!(SeriesKernel::build(p, 1e-15, 1.0).is_err());
    }

    #[test]
    fn values_at_origin() {
        let k = kernel(3, 1.3, 2.0);
        assert_eq!(k.eval_u(0.0).unwrap(), 1.0);
        assert_eq!(k.eval_log_u(0.0).unwrap(), 0.0);
        assert_eq!(k.eval_u_prime(0.0).unwrap(), 0.0);
        assert_eq!(k.direct_rate(0.0).unwrap(), 0.0);
    }

    #[test]
    fn reference_values_n2_sigma1() {
        let k = kernel(2, 1.0, 1.0);
        assert!(rel(k.eval_u(1.0).unwrap(), U_N2_S1_R1) < 1e-15);
        assert!(rel(k.eval_log_u(1.0).unwrap(), U_N2_S1_R1.ln()) < 1e-14);
        assert!(rel(k.eval_u_prime(1.0).unwrap(), UP_N2_S1_R1) < 1e-15);
        assert!(rel(k.expected_optimal_cost(0.0).unwrap(), COST_N2_S1_R1) < 1e-14);
        assert_eq!(k.expected_optimal_cost(1.0).unwrap(), 0.0);
    }

    #[test]
    fn log_and_direct_paths_agree() {
        for (n, sigma, r_max) in [(1, 0.5, 2.0), (2, 1.0, 3.0), (10, 0.7, 2.5), (100, 0.5, 2.0)] {
            let k = kernel(n, sigma, r_max);
            for i in 0..=100 {
                let r = r_max * i as f64 / 100.0;
                let u = k.eval_u(r).unwrap();
                let lu = k.eval_log_u(r).unwrap();
                assert!(rel(lu.exp(), u) < 1e-13, "N={n} r={r}");
                if r > 0.0 {
                    let up = k.eval_u_prime(r).unwrap();
                    let lup = k.eval_log_u_prime(r).unwrap();
                    assert!(rel(lup.exp(), up) < 1e-13);
                }
            }
        }
    }

    #[test]
    fn horner_and_log_branches_meet_at_x_one() {
        let p = ModelParams::new(5, 1.0, 3.0).unwrap();
        let k = SeriesKernel::build(p, 1e-15, 3.0).unwrap();
        let r1 = std::f64::consts::SQRT_2;
        let below = k.eval_u(r1 * (1.0 - 1e-12)).unwrap();
        let above = k.eval_u(r1 * (1.0 + 1e-12)).unwrap();
        assert!(rel(below, above) < 1e-11);
        let below = k.eval_u_prime(r1 * (1.0 - 1e-12)).unwrap();
        let above = k.eval_u_prime(r1 * (1.0 + 1e-12)).unwrap();
        assert!(rel(below, above) < 1e-11);
    }

    #[test]
    fn log_form_survives_overflow() {
        // ln u ~ r^2 / (2 sigma^2) = 800 here, well past f64 range.
        let p = ModelParams::new(2, 0.5, 20.0).unwrap();
        let k = SeriesKernel::build(p, 1e-15, 20.0).unwrap();
        assert!(k.eval_u(20.0).unwrap().is_infinite());
        let lu = k.eval_log_u(20.0).unwrap();
        let x = p.expansion_var(20.0);
        assert!(lu.is_finite());
        assert!(lu <= x / 4.0);
        assert!(k.eval_log_u_prime(20.0).unwrap().is_finite());
        let rate = k.direct_rate(20.0).unwrap();
        assert!(rate > 0.99 && rate < 1.0);
    }

    #[test]
    fn out_of_range_is_rejected() {
        let k = kernel(2, 1.0, 1.0);
        for r in [-1e-9, 1.0 + 1e-12, f64::NAN] {
            assert!(matches!(k.eval_u(r), Err(Error::OutOfRange { .. })));
            assert!(k.eval_log_u(r).is_err());
            assert!(k.eval_u_prime(r).is_err());
        }
        assert!(matches!(
            k.expected_optimal_cost(1.5),
            Err(Error::StartBeyondBoundary { .. })
        ));
    }

    #[test]
    fn cost_is_bounded_and_decreasing() {
        for (n, sigma, radius) in [(2, 1.0, 1.0), (4, 0.5, 2.0), (50, 2.0, 2.0)] {
            let k = kernel(n, sigma, radius);
            let bound = radius.powi(4) / (2.0 * sigma * sigma * (n as f64 + 2.0));
            let mut prev = f64::INFINITY;
            for i in 0..=50 {
                let r0 = radius * i as f64 / 50.0;
                let c = k.expected_optimal_cost(r0).unwrap();
                assert!(c >= 0.0 && c <= prev);
                prev = c;
            }
            assert!(k.expected_optimal_cost(0.0).unwrap() <= bound * (1.0 + 1e-12));
        }
    }
}
