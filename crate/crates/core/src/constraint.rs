//! Risk-aware threshold constraint and the exponential risk cost field.
//!
//! `φ(x) = α − r_β(ĝ(x))` is negative where the perceived hazard exceeds the
//! threshold. The cost `f(x) = max(exp(−γ φ(x)), 1)` is 1 on the satisfied set
//! and grows exponentially with the violation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::{GaussianBelief, GpModel};
use crate::risk::RiskMetric;

/// Largest exponent passed to `exp` before the cost is reported saturated.
pub const MAX_EXPONENT: f64 = 700.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskConstraint {
    pub metric: RiskMetric,
    pub alpha: f64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
}

fn default_gamma() -> f64 {
    0.1
}

/// Value of the cost field at a state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostSample {
    pub value: f64,
    /// The exponent hit [`MAX_EXPONENT`] and the value was capped.
    pub saturated: bool,
}

impl RiskConstraint {
    pub fn new(metric: RiskMetric, alpha: f64, gamma: f64) -> Result<Self> {
        let c = Self { metric, alpha, gamma };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        self.metric.validate()?;
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return Err(Error::InvalidInput(format!("gamma must be positive, got {}", self.gamma)));
        }
        if !self.alpha.is_finite() {
            return Err(Error::InvalidInput("alpha must be finite".into()));
        }
        Ok(())
    }

    pub fn risk(&self, model: &GpModel, x: &[f64]) -> Result<f64> {
        Ok(self.metric.apply(&model.posterior(x)?))
    }

    pub fn phi(&self, model: &GpModel, x: &[f64]) -> Result<f64> {
        Ok(self.alpha - self.risk(model, x)?)
    }

    fn exponential(&self, phi: f64) -> (f64, bool) {
        let e = -self.gamma * phi;
        if e > MAX_EXPONENT {
            (MAX_EXPONENT.exp(), true)
        } else {
            (e.exp(), false)
        }
    }

    /// Cost for a known constraint value.
    pub fn cost_from_phi(&self, phi: f64) -> CostSample {
        if phi >= 0.0 {
            return CostSample { value: 1.0, saturated: false };
        }
        let (value, saturated) = self.exponential(phi);
        CostSample { value: value.max(1.0), saturated }
    }

    /// Evaluates the cost field.
    ///
    /// Skips the variance solve when the metric is already satisfied at the
    /// prior standard deviation, since the posterior variance never exceeds it.
    pub fn cost(&self, model: &GpModel, x: &[f64]) -> Result<CostSample> {
        let c = self.metric.sigma_coefficient();
        let mean = model.posterior_mean(x)?;
        let prior_sd = model.kernel().prior_variance(x).sqrt();
        let upper = mean + c.max(0.0) * prior_sd;
        if upper <= self.alpha {
            return Ok(CostSample { value: 1.0, saturated: false });
        }
        let phi = self.phi(model, x)?;
        Ok(self.cost_from_phi(phi))
    }

    /// Conservative gradient of the cost field.
    ///
    /// On the violated set the derivative of the risk is replaced by the risk
    /// of the derivative belief, evaluated with the same metric and level.
    pub fn cost_gradient(&self, model: &GpModel, x: &[f64]) -> Result<Vec<f64>> {
        let phi = self.phi(model, x)?;
        if phi >= 0.0 {
            return Ok(vec![0.0; x.len()]);
        }
        let (scale, _) = self.exponential(phi);
        Ok(model
            .posterior_derivative(x)?
            .iter()
            .map(|b: &GaussianBelief| self.gamma * self.metric.apply(b) * scale)
            .collect())
    }
}
