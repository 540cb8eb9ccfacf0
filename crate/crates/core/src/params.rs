use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Model parameters.
///
/// `beta` is the total birth rate of an occupied site; each of the `2d`
/// directed neighbor edges carries arrows at rate `beta / (2d)`. Sites block
/// at rate `alpha` and unblock at rate `alpha * delta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct Params {
    d: usize,
    alpha: f64,
    beta: f64,
    delta: f64,
}

#[derive(Serialize, Deserialize)]
struct RawParams {
    d: usize,
    alpha: f64,
    beta: f64,
    delta: f64,
}

impl TryFrom<RawParams> for Params {
    type Error = Error;

    fn try_from(raw: RawParams) -> Result<Self> {
        Params::new(raw.d, raw.alpha, raw.beta, raw.delta)
    }
}

impl From<Params> for RawParams {
    fn from(p: Params) -> Self {
        RawParams {
            d: p.d,
            alpha: p.alpha,
            beta: p.beta,
            delta: p.delta,
        }
    }
}

fn check_rate(name: &str, value: f64) -> Result<()> {
    if !value.is_finite() || value < 0.0 {
        return Err(Error::InvalidParams(format!(
            "{name} must be finite and nonnegative, got {value}"
        )));
    }
    Ok(())
}

impl Params {
    pub fn new(d: usize, alpha: f64, beta: f64, delta: f64) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidParams("dimension d must be at least 1".into()));
        }
        check_rate("alpha", alpha)?;
        check_rate("beta", beta)?;
        check_rate("delta", delta)?;
        Ok(Params {
            d,
            alpha,
            beta,
            delta,
        })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Stationary probability that a site is blocked.
    pub fn rho(&self) -> f64 {
        1.0 / (1.0 + self.delta)
    }

    /// Unblocking probability after the time change `t -> alpha (1 + delta) t`.
    pub fn q(&self) -> f64 {
        self.delta / (1.0 + self.delta)
    }

    /// Arrow rate along one directed edge.
    pub fn arrow_rate(&self) -> f64 {
        self.beta / (2 * self.d) as f64
    }

    pub fn block_rate(&self) -> f64 {
        self.alpha
    }

    pub fn unblock_rate(&self) -> f64 {
        self.alpha * self.delta
    }

    pub fn with_beta(self, beta: f64) -> Result<Self> {
        Params::new(self.d, self.alpha, beta, self.delta)
    }

    pub fn with_delta(self, delta: f64) -> Result<Self> {
        Params::new(self.d, self.alpha, self.beta, delta)
    }

    pub fn with_alpha(self, alpha: f64) -> Result<Self> {
        Params::new(self.d, alpha, self.beta, self.delta)
    }
}

/// Stationary blocked-site probability `1 / (1 + delta)` of the flip process.
pub fn equilibrium_density(delta: f64) -> Result<f64> {
    check_rate("delta", delta)?;
    Ok(1.0 / (1.0 + delta))
}
