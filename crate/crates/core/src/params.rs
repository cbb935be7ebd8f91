use crate::error::{Error, Result};

/// Problem constants shared by every module.
///
/// `alpha` is the value of the kernel at the origin. The optimal control is
/// invariant under rescaling the kernel, so it is pinned to one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    n_goods: usize,
    sigma: f64,
    radius: f64,
    alpha: f64,
}

impl ModelParams {
    pub fn new(n_goods: usize, sigma: f64, radius: f64) -> Result<Self> {
        if n_goods == 0 {
            return Err(Error::InvalidParams("n_goods must be at least 1".into()));
        }
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::InvalidParams(format!("sigma must be positive, got {sigma}")));
        }
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::InvalidParams(format!("radius must be positive, got {radius}")));
        }
        Ok(Self {
            n_goods,
            sigma,
            radius,
            alpha: 1.0,
        })
    }

    pub fn n_goods(&self) -> usize {
        self.n_goods
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// N as a float, for use in formulas.
    pub(crate) fn n(&self) -> f64 {
        self.n_goods as f64
    }

    /// Expansion variable `x = r^4 / (4 sigma^4)`.
    pub fn expansion_var(&self, r: f64) -> f64 {
        let s = r * r / (2.0 * self.sigma * self.sigma);
        s * s
    }
}
