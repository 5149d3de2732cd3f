//! Risk metrics over Gaussian beliefs: expected value, VaR and CVaR.
//!
//! All metrics are evaluated in closed form. For `Z ~ N(μ, σ²)` and tail mass
//! `β` the upper-tail quantities are
//!
//! ```text
//! VaR_β(Z)  = μ + σ Q(1 − β)
//! CVaR_β(Z) = μ + σ pdf(Q(1 − β)) / β
//! ```
//!
//! where `Q` is the standard normal quantile. The lower tail mirrors them.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::gp::GaussianBelief;

const SQRT_2PI: f64 = 2.506_628_274_631_000_7;

pub fn standard_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / SQRT_2PI
}

pub fn standard_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Inverse of the standard normal CDF.
///
/// Acklam's rational approximation (relative error ~1e-9) followed by one
/// Halley step against the erfc-based CDF, which brings the result to
/// near machine precision over (1e-300, 1 − 1e-16).
pub fn standard_normal_quantile(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    const P_LOW: f64 = 0.024_25;

    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let x = if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    // Halley refinement; evaluate the residual in the smaller tail.
    let e = if p < 0.5 {
        standard_normal_cdf(x) - p
    } else {
        (1.0 - p) - standard_normal_cdf(-x)
    };
    let u = e * SQRT_2PI * (0.5 * x * x).exp();
    x - u / (1.0 + 0.5 * x * u)
}

/// Which tail of the distribution is considered dangerous.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tail {
    #[default]
    Upper,
    Lower,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RiskKind {
    Expected,
    Var,
    Cvar,
}

/// A risk metric with its safety level `β` (tail mass).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskMetric {
    #[serde(rename = "type")]
    pub kind: RiskKind,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default)]
    pub tail: Tail,
}

fn default_beta() -> f64 {
    0.05
}

fn check_level(beta: f64) -> Result<()> {
    if beta > 0.0 && beta < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("safety level must lie in (0, 1), got {beta}")))
    }
}

fn check_belief(belief: &GaussianBelief) -> Result<()> {
    if belief.variance >= 0.0 && belief.mean.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("invalid belief {belief:?}")))
    }
}

fn var_unchecked(belief: &GaussianBelief, beta: f64, tail: Tail) -> f64 {
    let sigma = belief.std_dev();
    if sigma == 0.0 {
        return belief.mean;
    }
    match tail {
        Tail::Upper => belief.mean + sigma * standard_normal_quantile(1.0 - beta),
        Tail::Lower => belief.mean + sigma * standard_normal_quantile(beta),
    }
}

fn cvar_unchecked(belief: &GaussianBelief, beta: f64, tail: Tail) -> f64 {
    let sigma = belief.std_dev();
    if sigma == 0.0 {
        return belief.mean;
    }
    let density = standard_normal_pdf(standard_normal_quantile(beta));
    match tail {
        Tail::Upper => belief.mean + sigma * density / beta,
        Tail::Lower => belief.mean - sigma * density / beta,
    }
}

/// Value at Risk: the `(1 − β)`-quantile for the upper tail, the
/// `β`-quantile for the lower tail.
pub fn value_at_risk(belief: &GaussianBelief, beta: f64, tail: Tail) -> Result<f64> {
    check_level(beta)?;
    check_belief(belief)?;
    Ok(var_unchecked(belief, beta, tail))
}

/// Conditional Value at Risk: mean of the `β`-mass tail beyond the VaR.
pub fn cvar(belief: &GaussianBelief, beta: f64, tail: Tail) -> Result<f64> {
    check_level(beta)?;
    check_belief(belief)?;
    Ok(cvar_unchecked(belief, beta, tail))
}

impl RiskMetric {
    pub fn new(kind: RiskKind, beta: f64, tail: Tail) -> Result<Self> {
        let m = Self { kind, beta, tail };
        m.validate()?;
        Ok(m)
    }

    pub fn expected() -> Self {
        Self {
            kind: RiskKind::Expected,
            beta: default_beta(),
            tail: Tail::Upper,
        }
    }

    pub fn cvar(beta: f64) -> Result<Self> {
        Self::new(RiskKind::Cvar, beta, Tail::Upper)
    }

    pub fn var(beta: f64) -> Result<Self> {
        Self::new(RiskKind::Var, beta, Tail::Upper)
    }

    pub fn validate(&self) -> Result<()> {
        check_level(self.beta)
    }

    /// Same metric at a different safety level.
    pub fn with_level(&self, beta: f64) -> Result<Self> {
        Self::new(self.kind, beta, self.tail)
    }

    /// Perceived risk of `belief`. The metric must be valid.
    pub fn apply(&self, belief: &GaussianBelief) -> f64 {
        debug_assert!(self.validate().is_ok());
        match self.kind {
            RiskKind::Expected => belief.mean,
            RiskKind::Var => var_unchecked(belief, self.beta, self.tail),
            RiskKind::Cvar => cvar_unchecked(belief, self.beta, self.tail),
        }
    }

    /// Factor `c` such that the metric equals `μ + c σ` on any Gaussian.
    pub fn sigma_coefficient(&self) -> f64 {
        match self.kind {
            RiskKind::Expected => 0.0,
            RiskKind::Var => var_unchecked(&GaussianBelief::new(0.0, 1.0), self.beta, self.tail),
            RiskKind::Cvar => cvar_unchecked(&GaussianBelief::new(0.0, 1.0), self.beta, self.tail),
        }
    }
}
