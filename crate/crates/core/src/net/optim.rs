//! Rectified Adam.
//!
//! With `ρ∞ = 2/(1-β2) - 1` and `ρt = ρ∞ - 2 t β2^t / (1 - β2^t)`, each step
//! updates the first and second moments as Adam does. When `ρt > 4` the
//! adaptive step is applied scaled by the variance rectification term
//! `r_t = sqrt((ρt-4)(ρt-2)ρ∞ / ((ρ∞-4)(ρ∞-2)ρt))`; otherwise the
//! bias-corrected momentum is applied directly.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RAdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for RAdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl RAdamConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = (0.0..1.0).contains(&self.beta1)
            && self.beta2 > 0.0
            && self.beta2 < 1.0
            && self.eps > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!(
                "invalid optimizer settings {self:?}"
            )))
        }
    }

    fn rho_inf(&self) -> f64 {
        2.0 / (1.0 - self.beta2) - 1.0
    }

    /// Rectification term for step `t` (1-based), or `None` while the
    /// variance of the adaptive rate is intractable (`ρt <= 4`).
    pub fn rectification(&self, t: u64) -> Option<f64> {
        let rho_inf = self.rho_inf();
        let b2t = self.beta2.powf(t as f64);
        let rho_t = rho_inf - 2.0 * t as f64 * b2t / (1.0 - b2t);
        (rho_t > 4.0).then(|| {
            (((rho_t - 4.0) * (rho_t - 2.0) * rho_inf)
                / ((rho_inf - 4.0) * (rho_inf - 2.0) * rho_t))
                .sqrt()
        })
    }
}

#[derive(Debug, Clone)]
pub struct RAdam {
    cfg: RAdamConfig,
    lr: f64,
    t: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl RAdam {
    /// `shapes` lists the length of each parameter tensor.
    pub fn new(cfg: RAdamConfig, lr: f64, shapes: &[usize]) -> Self {
        Self {
            cfg,
            lr,
            t: 0,
            m: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            v: shapes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn step(&mut self, params: Vec<&mut [f64]>, grads: &[Vec<f64>]) {
        debug_assert_eq!(params.len(), grads.len());
        self.t += 1;
        let RAdamConfig { beta1, beta2, eps } = self.cfg;
        let t = self.t as f64;
        let bc1 = 1.0 - beta1.powf(t);
        let bc2 = 1.0 - beta2.powf(t);
        let rect = self.cfg.rectification(self.t);
        let lr = self.lr;

        for (((p, g), m), v) in params
            .into_iter()
            .zip(grads)
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            for (((p, g), m), v) in p.iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
                *m = beta1 * *m + (1.0 - beta1) * g;
                *v = beta2 * *v + (1.0 - beta2) * g * g;
                let m_hat = *m / bc1;
                match rect {
                    Some(r) => {
                        let adaptive = bc2.sqrt() / (v.sqrt() + eps);
                        *p -= lr * r * m_hat * adaptive;
                    }
                    None => *p -= lr * m_hat,
                }
            }
        }
    }
}
