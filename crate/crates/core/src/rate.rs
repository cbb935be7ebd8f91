//! Production-rate coefficient and feedback control.
//!
//! The optimal production rate is the same multiple of the inventory for every
//! good: `p_i = rho(|y|) y_i` with `rho(r) = sigma^2 u'(r) / (r u(r))`. Near the
//! origin `rho` is evaluated from the quotient series
//!
//! ```text
//! rho(r) = (r^2 / sigma^2) sum_{j>=1} c_j x^{j-1},   sum_j c_j x^j = (sum_j j a_j x^j) / (sum_j a_j x^j)
//! ```
//!
//! whose radius of convergence is finite. Past `x_switch` the rate comes from a
//! tabulated solution of the Riccati equation for `w = u'/u`:
//!
//! ```text
//! w' = r^2 / sigma^4 - w^2 - (N - 1) w / r,   w(0) = 0
//! ```

use crate::error::{Error, Result};
use crate::params::ModelParams;
use crate::report::fmt_f64;
use crate::series::SeriesKernel;

/// Default trust radius of the quotient series, in `x = r^4 / (4 sigma^4)`.
pub const DEFAULT_X_SWITCH: f64 = 0.5;

/// Relative agreement required between the two evaluation paths on the overlap.
pub const PATH_CONSISTENCY_TOL: f64 = 1e-8;

/// Relative change allowed when the Riccati step is halved.
const RICCATI_HALVING_TOL: f64 = 1e-10;
const RICCATI_START: f64 = 1e-6;
const RICCATI_STEP_SCALE: f64 = 0.5;
const RICCATI_MAX_SUBSTEPS: usize = 256;
const MIN_QUOTIENT_TERMS: usize = 64;
const QUOTIENT_TERM_FLOOR: f64 = 1e-17;

/// Coefficients `c_j` of the quotient series from the kernel coefficients `a_j`
/// (with `a_0 = 1`), by the Cauchy-division recursion
/// `c_j = b_j - sum_{i=1..j} c_{j-i} a_i`, `b_j = j a_j`.
///
/// The subtraction cancels roughly `N^{j-1}` in relative terms, so for large
/// `N` only the first few coefficients are accurate in floating point; use
/// [`rate_coefficients`] for evaluation.
pub fn quotient_coefficients(a: &[f64]) -> Vec<f64> {
    let mut c = vec![0.0; a.len()];
    for j in 1..a.len() {
        let conv: f64 = (1..=j).map(|i| c[j - i] * a[i]).sum();
        c[j] = (j as f64 * a[j] - conv) / a[0];
    }
    c
}

/// The same coefficients `c_0..c_{len-1}` from the Riccati form of the
/// quotient. With `g(x) = sum_{k>=0} c_{k+1} x^k = S'(x)/S(x)`, the kernel
/// equation `4x S'' + (N+2) S' = S` becomes `4x (g' + g^2) + (N+2) g = 1`, so
///
/// ```text
/// c_1 = 1/(N+2),   c_{k+1} = -4 sum_{i=0}^{k-1} c_{i+1} c_{k-i} / (4k + N + 2)
/// ```
///
/// The `c_j` alternate in sign, so every product in the sum has the same sign
/// and the recurrence is free of cancellation.
pub fn rate_coefficients(n_goods: usize, len: usize) -> Vec<f64> {
    let n = n_goods as f64;
    let mut c = vec![0.0; len];
    if len > 1 {
        c[1] = 1.0 / (n + 2.0);
    }
    for k in 1..len.saturating_sub(1) {
        let conv: f64 = (0..k).map(|i| c[i + 1] * c[k - i]).sum();
        c[k + 1] = -4.0 * conv / (4.0 * k as f64 + n + 2.0);
    }
    c
}

/// Upper envelope of the rate: `sigma^2 (sqrt(N^2/r^2 + 4 r^2/sigma^4) - N/r) / (2r)`.
///
/// Written in the cancellation-free form `2 r / (sigma^2 (sqrt(..) + N/r))`.
pub fn rate_upper_envelope(params: &ModelParams, r: f64) -> f64 {
    if r == 0.0 {
        return 0.0;
    }
    let s2 = params.sigma() * params.sigma();
    let n_over_r = params.n() / r;
    let root = (n_over_r * n_over_r + 4.0 * r * r / (s2 * s2)).sqrt();
    2.0 * r / (s2 * (root + n_over_r))
}

/// Lower envelope of the rate: `max(0, 1 - max(N, 2) sigma^2 / r^2)`.
///
/// `l(r) = r/sigma^2 - c/r` with `c = max(N, 2)` is a subsolution of the
/// Riccati equation for `r >= sigma sqrt(c)`, where it starts at or below
/// zero, so `w >= l` there.
pub fn rate_lower_envelope(params: &ModelParams, r: f64) -> f64 {
    if r == 0.0 {
        return 0.0;
    }
    let c = params.n().max(2.0);
    let s2 = params.sigma() * params.sigma();
    (1.0 - c * s2 / (r * r)).max(0.0)
}

/// Tabulated Riccati solution `w = u'/u` on a graded grid.
#[derive(Debug, Clone)]
pub struct RiccatiTable {
    r: Vec<f64>,
    w: Vec<f64>,
    substeps: usize,
}

impl RiccatiTable {
    fn build(params: &ModelParams, r_max: f64) -> Result<Self> {
        let r0 = RICCATI_START.min(0.5 * r_max);
        let base = riccati_nodes(params, r0, r_max);
        let mut substeps = 1;
        let (_, mut coarse) = integrate_riccati(params, &base, substeps);
        loop {
            let (r, w) = integrate_riccati(params, &base, 2 * substeps);
            let fine_at_base = w.iter().step_by(2 * substeps);
            let change = coarse
                .iter()
                .step_by(substeps)
                .zip(fine_at_base)
                .map(|(c, f)| (c - f).abs() / f.abs().max(f64::MIN_POSITIVE))
                .fold(0.0, f64::max);
            substeps *= 2;
            if change < RICCATI_HALVING_TOL {
                return Ok(Self { r, w, substeps });
            }
            if substeps >= RICCATI_MAX_SUBSTEPS || !change.is_finite() {
                return Err(Error::RefinementNotConverged {
                    achieved: change,
                    tol: RICCATI_HALVING_TOL,
                });
            }
            coarse = w;
        }
    }

    /// Table nodes (every RK4 substep point).
    pub fn nodes(&self) -> &[f64] {
        &self.r
    }

    pub fn values(&self) -> &[f64] {
        &self.w
    }

    /// RK4 substeps per base interval in the accepted solution.
    pub fn substeps(&self) -> usize {
        self.substeps
    }

    /// Cubic Hermite interpolation of `w` using the ODE right-hand side as slope.
    fn interpolate(&self, params: &ModelParams, r: f64) -> f64 {
        let i = self.r.partition_point(|&ri| ri <= r).clamp(1, self.r.len() - 1) - 1;
        let (r0, r1) = (self.r[i], self.r[i + 1]);
        let (w0, w1) = (self.w[i], self.w[i + 1]);
        let h = r1 - r0;
        let d0 = riccati_rhs(params, r0, w0) * h;
        let d1 = riccati_rhs(params, r1, w1) * h;
        let t = (r - r0) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        (2.0 * t3 - 3.0 * t2 + 1.0) * w0
            + (t3 - 2.0 * t2 + t) * d0
            + (-2.0 * t3 + 3.0 * t2) * w1
            + (t3 - t2) * d1
    }
}

fn riccati_rhs(params: &ModelParams, r: f64, w: f64) -> f64 {
    let s2 = params.sigma() * params.sigma();
    r * r / (s2 * s2) - w * w - (params.n() - 1.0) * w / r
}

/// Graded nodes: step `kappa r / (N + 1 + 2 r^2 / sigma^2)` keeps `|h dF/dw|`
/// below `kappa` on the whole range.
fn riccati_nodes(params: &ModelParams, r0: f64, r_max: f64) -> Vec<f64> {
    let s2 = params.sigma() * params.sigma();
    let mut nodes = vec![r0];
    let mut r = r0;
    while r < r_max {
        let h = RICCATI_STEP_SCALE * r / (params.n() + 1.0 + 2.0 * r * r / s2);
        r = (r + h).min(r_max);
        if r_max - r < 1e-3 * h {
            r = r_max;
        }
        nodes.push(r);
    }
    nodes
}

/// RK4 with `substeps` equal steps per base interval; returns every step point.
fn integrate_riccati(params: &ModelParams, base: &[f64], substeps: usize) -> (Vec<f64>, Vec<f64>) {
    let s2 = params.sigma() * params.sigma();
    let r0 = base[0];
    // leading-order seed from the kernel series
    let mut w = r0 * r0 * r0 / (s2 * s2 * (params.n() + 2.0));
    let cap = (base.len() - 1) * substeps + 1;
    let (mut rs, mut ws) = (Vec::with_capacity(cap), Vec::with_capacity(cap));
    rs.push(r0);
    ws.push(w);
    for pair in base.windows(2) {
        let h = (pair[1] - pair[0]) / substeps as f64;
        for k in 0..substeps {
            let r = pair[0] + h * k as f64;
            let k1 = riccati_rhs(params, r, w);
            let k2 = riccati_rhs(params, r + 0.5 * h, w + 0.5 * h * k1);
            let k3 = riccati_rhs(params, r + 0.5 * h, w + 0.5 * h * k2);
            let k4 = riccati_rhs(params, r + h, w + h * k3);
            w += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            rs.push(if k + 1 == substeps { pair[1] } else { r + h });
            ws.push(w);
        }
    }
    (rs, ws)
}

/// Feedback production rates for one inventory state.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlVector {
    pub p: Vec<f64>,
}

/// Production-rate evaluator: quotient series near the origin, Riccati table beyond.
#[derive(Debug, Clone)]
pub struct RateSeries {
    kernel: SeriesKernel,
    c: Vec<f64>,
    eval_terms: usize,
    x_switch: f64,
    table: Option<RiccatiTable>,
}

impl RateSeries {
    pub fn build(kernel: &SeriesKernel, x_switch: f64) -> Result<Self> {
        if !(x_switch.is_finite() && x_switch > 0.0) {
            return Err(Error::InvalidParams(format!(
                "x_switch must be positive, got {x_switch}"
            )));
        }
        let params = *kernel.params();
        let len = (kernel.truncation_order() + 1).max(MIN_QUOTIENT_TERMS + 1);
        let c = rate_coefficients(params.n_goods(), len);
        if let Some(j) = c.iter().position(|v| !v.is_finite()) {
            return Err(Error::QuotientBreakdown(format!("c_{j} is not finite")));
        }

        // Keep the terms that matter on [0, x_switch]; the series must have
        // decayed well before the last computed coefficient.
        let floor = QUOTIENT_TERM_FLOOR * c[1].abs();
        let size = |j: usize| c[j].abs() * x_switch.powi(j as i32 - 1);
        let eval_terms = (1..c.len()).rev().find(|&j| size(j) > floor).unwrap_or(1);
        if eval_terms + 4 >= c.len() {
            return Err(Error::QuotientBreakdown(format!(
                "quotient series has not converged at x_switch = {x_switch}"
            )));
        }

        let r_max = kernel.r_max();
        let table = if params.expansion_var(r_max) > x_switch {
            Some(RiccatiTable::build(&params, r_max)?)
        } else {
            None
        };

        let rate = Self {
            kernel: kernel.clone(),
            c,
            eval_terms,
            x_switch,
            table,
        };
        let gap = rate.consistency_gap();
        if gap > PATH_CONSISTENCY_TOL {
            return Err(Error::QuotientBreakdown(format!(
                "series and Riccati paths differ by {gap:e} near x_switch"
            )));
        }
        Ok(rate)
    }

    pub fn params(&self) -> &ModelParams {
        self.kernel.params()
    }

    pub fn kernel(&self) -> &SeriesKernel {
        &self.kernel
    }

    /// Quotient-series coefficients `c_0, c_1, ...`.
    pub fn coefficients(&self) -> &[f64] {
        &self.c
    }

    pub fn x_switch(&self) -> f64 {
        self.x_switch
    }

    pub fn riccati_table(&self) -> Option<&RiccatiTable> {
        self.table.as_ref()
    }

    pub fn r_max(&self) -> f64 {
        self.kernel.r_max()
    }

    /// `rho(r)` from the quotient series, valid for `x <= x_switch`.
    pub fn series_rate(&self, r: f64) -> f64 {
        let params = self.params();
        let s2 = params.sigma() * params.sigma();
        let x = params.expansion_var(r);
        let poly = self.c[1..=self.eval_terms]
            .iter()
            .rev()
            .fold(0.0, |acc, &c| acc * x + c);
        r * r / s2 * poly
    }

    /// `rho(r)` from the Riccati table, `None` below the table start or when no
    /// table was needed.
    pub fn riccati_rate(&self, r: f64) -> Option<f64> {
        let table = self.table.as_ref()?;
        if r < table.r[0] || r > *table.r.last()? {
            return None;
        }
        let params = self.params();
        let s2 = params.sigma() * params.sigma();
        Some(s2 * table.interpolate(params, r) / r)
    }

    /// Production-rate coefficient `rho(r)`.
    pub fn rate_coeff(&self, r: f64) -> Result<f64> {
        self.kernel.check_range(r)?;
        if r == 0.0 {
            return Ok(0.0);
        }
        let x = self.params().expansion_var(r);
        if x <= self.x_switch {
            return Ok(self.series_rate(r));
        }
        // x > x_switch implies the table exists and covers r
        Ok(self
            .riccati_rate(r)
            .expect("Riccati table covers the range beyond x_switch"))
    }

    /// Largest relative difference between the two evaluation paths on
    /// `x in [x_switch / 2, x_switch]` (zero when the table does not reach it).
    pub fn consistency_gap(&self) -> f64 {
        let params = self.params();
        let sigma = params.sigma();
        let r_of = |x: f64| sigma * (4.0 * x).sqrt().sqrt();
        (0..=32)
            .map(|i| self.x_switch * (0.5 + 0.5 * i as f64 / 32.0))
            .map(r_of)
            .filter_map(|r| {
                let ric = self.riccati_rate(r)?;
                let ser = self.series_rate(r);
                Some((ric - ser).abs() / ser.abs())
            })
            .fold(0.0, f64::max)
    }

    /// Feedback control `p = rho(|y|) y`.
    pub fn feedback(&self, y: &[f64]) -> Result<ControlVector> {
        let mut p = vec![0.0; y.len()];
        self.feedback_into(y, &mut p)?;
        Ok(ControlVector { p })
    }

    /// Allocation-free form of [`Self::feedback`].
    pub fn feedback_into(&self, y: &[f64], p: &mut [f64]) -> Result<()> {
        if y.len() != p.len() {
            return Err(Error::InvalidState(format!(
                "state has {} components, output has {}",
                y.len(),
                p.len()
            )));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidState("non-finite inventory component".into()));
        }
        let rho = self.rate_coeff(crate::math::norm(y))?;
        for (pi, yi) in p.iter_mut().zip(y) {
            *pi = rho * yi;
        }
        Ok(())
    }

    /// CSV table `r,rate` over the given radii.
    pub fn rate_table_csv(&self, radii: &[f64]) -> Result<String> {
        let mut out = String::from("r,rate\n");
        for &r in radii {
            let rate = self.rate_coeff(r)?;
            out.push_str(&format!("{},{}\n", fmt_f64(r), fmt_f64(rate)));
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::DEFAULT_TERM_TOL;

    // rho(1) for N = 2, sigma = 1 from 40-digit brute-force partial sums.
    const RHO_N2_S1_R1: f64 = 0.242_499_612_580_801_95;

    fn rate(n: usize, sigma: f64, r_max: f64) -> RateSeries {
        let p = ModelParams::new(n, sigma, r_max).unwrap();
        let k = SeriesKernel::build(p, DEFAULT_TERM_TOL, r_max).unwrap();
        RateSeries::build(&k, DEFAULT_X_SWITCH).unwrap()
    }

    #[test]
    fn cauchy_and_riccati_recursions_agree_for_small_n() {
        for n in [1usize, 2, 4] {
            let mut a = vec![1.0];
            for j in 1..=30 {
                let jf = j as f64;
                a.push(a[j - 1] / (jf * (n as f64 + 4.0 * jf - 2.0)));
            }
            let cauchy = quotient_coefficients(&a);
            let riccati = rate_coefficients(n, 31);
            for j in 1..=30 {
                let rel = (cauchy[j] - riccati[j]).abs() / riccati[j].abs();
                assert!(rel < 1e-11, "N={n} j={j} {rel:e}");
            }
        }
    }

    #[test]
    fn leading_coefficients() {
        for n in [1, 2, 4, 10, 100] {
            let rs = rate(n, 1.0, 1.0);
            let c = rs.coefficients();
            assert_eq!(c[0], 0.0);
            assert!((c[1] - 1.0 / (n as f64 + 2.0)).abs() < 1e-16);
        }
        // N = 2: c_2 = 2/64 - (1/4)(1/4) = -1/32
        let rs = rate(2, 1.0, 1.0);
        assert!((rs.coefficients()[2] + 1.0 / 32.0).abs() < 1e-17);
    }

    #[test]
    fn reference_rate_and_feedback() {
        let rs = rate(2, 1.0, 1.0);
        let rho = rs.rate_coeff(1.0).unwrap();
        assert!((rho - RHO_N2_S1_R1).abs() < 1e-14);
        let ctl = rs.feedback(&[0.6, 0.8]).unwrap();
        assert!((ctl.p[0] - RHO_N2_S1_R1 * 0.6).abs() < 1e-14);
        assert!((ctl.p[1] - RHO_N2_S1_R1 * 0.8).abs() < 1e-14);
    }

    #[test]
    fn zero_state_gives_zero_control() {
        let rs = rate(3, 0.8, 2.0);
        assert_eq!(rs.rate_coeff(0.0).unwrap(), 0.0);
        assert_eq!(rs.feedback(&[0.0; 3]).unwrap().p, vec![0.0; 3]);
    }

    #[test]
    fn small_r_leading_order() {
        let (n, sigma) = (5, 0.9);
        let rs = rate(n, sigma, 1.0);
        for r in [1e-3, 1e-2, 5e-2] {
            let lead = r * r / (sigma * sigma * (n as f64 + 2.0));
            let rho = rs.rate_coeff(r).unwrap();
            let x = rs.params().expansion_var(r);
            assert!((rho - lead).abs() / lead < 2.0 * x);
        }
    }

    #[test]
    fn paths_agree_on_overlap() {
        for n in [1, 2, 10, 100] {
            for sigma in [0.5, 1.0, 2.0] {
                let rs = rate(n, sigma, 3.0 * sigma);
                assert!(rs.riccati_table().is_some());
                assert!(rs.consistency_gap() < 1e-8, "N={n} sigma={sigma}");
            }
        }
    }

    #[test]
    fn riccati_matches_kernel_far_out() {
        let rs = rate(2, 0.5, 20.0);
        for r in [2.0, 5.0, 10.0, 20.0] {
            let direct = rs.kernel().direct_rate(r).unwrap();
            let rho = rs.rate_coeff(r).unwrap();
            assert!((rho - direct).abs() / direct < 1e-9, "r={r}");
        }
        assert!((1.0 - rs.rate_coeff(20.0).unwrap()) < 1e-3);
    }

    #[test]
    fn envelopes_bracket_rate() {
        for n in [1, 2, 4, 30] {
            let rs = rate(n, 0.7, 6.0);
            let p = *rs.params();
            for i in 1..=300 {
                let r = 6.0 * i as f64 / 300.0;
                let rho = rs.rate_coeff(r).unwrap();
                assert!(rho <= rate_upper_envelope(&p, r) + 1e-12, "N={n} r={r}");
                assert!(rho >= rate_lower_envelope(&p, r) - 1e-12, "N={n} r={r}");
                assert!(rate_upper_envelope(&p, r) <= 1.0);
            }
        }
    }

    #[test]
    fn feedback_rejects_bad_states() {
        let rs = rate(2, 1.0, 1.0);
        assert!(matches!(
            rs.feedback(&[f64::NAN, 0.0]),
            Err(Error::InvalidState(_))
        ));
        assert!(matches!(
            rs.feedback(&[1.0, 1.0]),
            Err(Error::OutOfRange { .. })
        ));
        assert!(RateSeries::build(rs.kernel(), 0.0).is_err());
    }

    #[test]
    fn csv_export() {
        let rs = rate(2, 1.0, 1.0);
        let csv = rs.rate_table_csv(&[0.0, 1.0]).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "r,rate");
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("0.0000000000000000e0,"));
        assert!(rs.rate_table_csv(&[2.0]).is_err());
    }
}
