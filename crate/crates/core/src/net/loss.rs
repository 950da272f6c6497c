//! α-balanced focal loss on a sigmoid output.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Probabilities are clamped to `[PROB_EPS, 1 - PROB_EPS]` inside the loss.
pub const PROB_EPS: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FocalLossParams {
    pub gamma: f64,
    pub alpha: f64,
}

impl Default for FocalLossParams {
    fn default() -> Self {
        Self {
            gamma: 2.5,
            alpha: 0.75,
        }
    }
}

impl FocalLossParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "gamma must be >= 0, got {}",
                self.gamma
            )));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "alpha must lie in (0, 1], got {}",
                self.alpha
            )));
        }
        Ok(())
    }

    /// Probability of the true class and its weight: `(p, α)` for y = 1,
    /// `(1 - p, 1 - α)` for y = 0.
    fn true_class(&self, p: f64, y: u8) -> (f64, f64) {
        let p = p.clamp(PROB_EPS, 1.0 - PROB_EPS);
        if y == 1 {
            (p, self.alpha)
        } else {
            (1.0 - p, 1.0 - self.alpha)
        }
    }
}

/// `-α_t (1 - p_t)^γ ln p_t` for the true class `y`.
pub fn focal_loss(p: f64, y: u8, params: &FocalLossParams) -> f64 {
    let (pt, at) = params.true_class(p, y);
    -at * (1.0 - pt).powf(params.gamma) * pt.ln()
}

/// Derivative of [`focal_loss`] with respect to the logit `z`, `p = σ(z)`.
///
/// `dL/dz = s α_t [γ p_t (1 - p_t)^γ ln p_t - (1 - p_t)^(γ+1)]` with
/// `s = +1` for y = 1 and `-1` for y = 0, evaluated at the clamped `p_t`.
pub fn focal_loss_grad_logit(p: f64, y: u8, params: &FocalLossParams) -> f64 {
    let (pt, at) = params.true_class(p, y);
    let q = 1.0 - pt;
    let g = at * (params.gamma * pt * q.powf(params.gamma) * pt.ln() - q.powf(params.gamma + 1.0));
    if y == 1 {
        g
    } else {
        -g
    }
}

/// Plain binary cross entropy on the clamped true-class probability.
pub fn cross_entropy(p: f64, y: u8) -> f64 {
    let p = p.clamp(PROB_EPS, 1.0 - PROB_EPS);
    if y == 1 {
        -p.ln()
    } else {
        -(1.0 - p).ln()
    }
}
