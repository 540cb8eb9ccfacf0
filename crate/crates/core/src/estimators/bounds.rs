//! Closed-form bounds: the extinction threshold in `beta` and the branching
//! bound on `delta`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Critical total birth rate of the ordinary contact process, supplied from
/// the literature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsInput {
    pub beta_c_cp: f64,
    #[serde(default)]
    pub source: String,
}

impl BoundsInput {
    pub fn new(beta_c_cp: f64, source: impl Into<String>) -> Result<Self> {
        let b = BoundsInput { beta_c_cp, source: source.into() };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta_c_cp > 0.0 && self.beta_c_cp.is_finite()) {
            return Err(Error::InvalidParams(format!("beta_c_cp = {} must be positive", self.beta_c_cp)));
        }
        Ok(())
    }

    /// Numerical estimates of `2d * lambda_c` for `d = 1, 2, 3`.
    pub fn literature(d: usize) -> Option<BoundsInput> {
        let (value, source) = match d {
            1 => (3.29785, "2 * 1.648924 (series and simulation estimates of lambda_c, d = 1)"),
            2 => (1.64874, "4 * 0.412185 (simulation estimate of lambda_c, d = 2)"),
            3 => (1.3296, "6 * 0.2216 (simulation estimate of lambda_c, d = 3)"),
            _ => return None,
        };
        Some(BoundsInput { beta_c_cp: value, source: source.into() })
    }
}

/// `(alpha + 1) * beta_c_cp`: at or below this birth rate the process dies out.
pub fn extinction_threshold_beta(alpha: f64, bounds: &BoundsInput) -> Result<f64> {
    bounds.validate()?;
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidParams(format!("alpha = {alpha}")));
    }
    Ok((alpha + 1.0) * bounds.beta_c_cp)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaBound {
    pub d: usize,
    pub q_star: f64,
    pub delta_p: f64,
    /// `|g_d(q_star) - 1|`.
    pub residual: f64,
}

/// `4d (2q(2 - q) / (1 - q)^2 + q)`, increasing on `[0, 1)`.
pub fn branching_expression(d: usize, q: f64) -> f64 {
    4.0 * d as f64 * (2.0 * q * (2.0 - q) / ((1.0 - q) * (1.0 - q)) + q)
}

/// Root `q_star` of `branching_expression(d, q) = 1`, by bisection, and
/// `delta_p = q_star / (1 - q_star)`. Every `delta < delta_p` gives extinction.
pub fn branching_bound_delta_p(d: usize) -> Result<DeltaBound> {
    if d == 0 {
        return Err(Error::InvalidParams("d must be at least 1".into()));
    }
    let (mut lo, mut hi) = (0.0f64, 0.5f64);
    while branching_expression(d, hi) < 1.0 {
        hi = 0.5 * (hi + 1.0);
    }
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if branching_expression(d, mid) < 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let q = if (branching_expression(d, lo) - 1.0).abs() <= (branching_expression(d, hi) - 1.0).abs() {
        lo
    } else {
        hi
    };
    Ok(DeltaBound {
        d,
        q_star: q,
        delta_p: q / (1.0 - q),
        residual: (branching_expression(d, q) - 1.0).abs(),
    })
}
