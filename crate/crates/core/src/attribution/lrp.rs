use super::{Attribution, Method};
use crate::error::{check_len, Error, Result};
use crate::net::MlpModel;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LrpParams {
    pub epsilon: f64,
}

impl Default for LrpParams {
    fn default() -> Self {
        Self { epsilon: 1e-6 }
    }
}

/// Relevance at every layer boundary. `relevances[0]` is the input
/// attribution and `relevances[L]` the output logit; `stabilized[k]` holds
/// the denominators `z + ε·sign(z)` of layer `k`.
#[derive(Debug, Clone)]
pub struct LrpTrace {
    pub relevances: Vec<Vec<f64>>,
    pub stabilized: Vec<Vec<f64>>,
}

/// ε-rule LRP. Relevance starts at the output logit (the sigmoid is not
/// decomposed) and each linear layer redistributes it as
/// `R_i = a_i Σ_k w_ki R_k / (z_k + ε·sign(z_k))`, with `sign(0) = +1`.
/// ReLUs pass relevance through unchanged.
pub fn lrp_epsilon_trace(model: &MlpModel, x: &[f64], params: &LrpParams) -> Result<LrpTrace> {
    if !(params.epsilon > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "LRP epsilon must be > 0, got {}",
            params.epsilon
        )));
    }
    check_len(model.n_inputs(), x.len())?;
    let trace = model.forward(x)?;
    let layers = model.layers();
    let n = layers.len();
    let mut relevances = vec![Vec::new(); n + 1];
    let mut stabilized = vec![Vec::new(); n];
    relevances[n] = vec![trace.logit()];
    for k in (0..n).rev() {
        let input = if k == 0 { x } else { &trace.post[k - 1] };
        let denom: Vec<f64> = trace.pre[k]
            .iter()
            .map(|&z| z + params.epsilon * if z >= 0.0 { 1.0 } else { -1.0 })
            .collect();
        let ratio: Vec<f64> = relevances[k + 1]
            .iter()
            .zip(&denom)
            .map(|(r, d)| r / d)
            .collect();
        let back = layers[k].backprop(&ratio);
        relevances[k] = input.iter().zip(back).map(|(a, s)| a * s).collect();
        stabilized[k] = denom;
    }
    Ok(LrpTrace {
        relevances,
        stabilized,
    })
}

pub fn lrp_epsilon(model: &MlpModel, x: &[f64], params: &LrpParams) -> Result<Attribution> {
    let mut t = lrp_epsilon_trace(model, x, params)?;
    let values = std::mem::take(&mut t.relevances[0]);
    Ok(Attribution::new(values, Method::Lrp)?.with_meta("epsilon", params.epsilon))
}
