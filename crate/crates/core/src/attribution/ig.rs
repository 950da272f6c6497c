use super::{Attribution, Method};
use crate::error::{check_len, Error, Result};
use crate::net::MlpModel;

#[derive(Debug, Clone, PartialEq)]
pub struct IgParams {
    pub baseline: Vec<f64>,
    pub steps: usize,
}

impl IgParams {
    pub const DEFAULT_STEPS: usize = 64;

    pub fn zero(m: usize) -> Self {
        Self {
            baseline: vec![0.0; m],
            steps: Self::DEFAULT_STEPS,
        }
    }
}

/// Integrated Gradients with the midpoint rule:
/// `attr_j = (x_j - b_j) / S * Σ_{k=1..S} ∂p/∂x_j (b + (k - ½)/S · (x - b))`.
pub fn integrated_gradients(model: &MlpModel, x: &[f64], params: &IgParams) -> Result<Attribution> {
    let m = model.n_inputs();
    check_len(m, x.len())?;
    check_len(m, params.baseline.len())?;
    if params.steps < 2 {
        return Err(Error::InvalidConfig(format!(
            "IG needs at least 2 steps, got {}",
            params.steps
        )));
    }
    let diff: Vec<f64> = x.iter().zip(&params.baseline).map(|(a, b)| a - b).collect();
    let mut total = vec![0.0; m];
    let mut point = vec![0.0; m];
    let s = params.steps as f64;
    for k in 0..params.steps {
        let t = (k as f64 + 0.5) / s;
        for ((p, b), d) in point.iter_mut().zip(&params.baseline).zip(&diff) {
            *p = b + t * d;
        }
        let trace = model.forward(&point)?;
        for (acc, g) in total.iter_mut().zip(model.grad_input_unchecked(&trace)) {
            *acc += g;
        }
    }
    let values = total.iter().zip(&diff).map(|(g, d)| d * g / s).collect();
    let mut attr = Attribution::new(values, Method::Ig)?.with_meta("steps", params.steps);
    attr.baseline = Some(params.baseline.clone());
    Ok(attr)
}
