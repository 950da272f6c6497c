use super::{Attribution, Method};
use crate::error::{check_len, Result};
use crate::net::{relu_grad, sigmoid, MlpModel};

/// Below this `|Δpre|` the Rescale multiplier falls back to the exact
/// derivative at the reference.
pub const RESCALE_THRESHOLD: f64 = 1e-9;

fn rescale(d_pre: f64, d_post: f64, derivative_at_ref: f64) -> f64 {
    if d_pre.abs() > RESCALE_THRESHOLD {
        d_post / d_pre
    } else {
        derivative_at_ref
    }
}

/// DeepLIFT with the Rescale rule on every nonlinearity (ReLUs and the
/// output sigmoid). Linear layers pass multipliers through their weights, so
/// the attributions sum to `p(x) - p(baseline)`.
pub fn deeplift_rescale(model: &MlpModel, x: &[f64], baseline: &[f64]) -> Result<Attribution> {
    let m = model.n_inputs();
    check_len(m, x.len())?;
    check_len(m, baseline.len())?;
    let tx = model.forward(x)?;
    let tb = model.forward(baseline)?;

    let zb = tb.logit();
    let sb = sigmoid(zb);
    let mut mult = vec![rescale(tx.logit() - zb, tx.prob - tb.prob, sb * (1.0 - sb))];
    let layers = model.layers();
    for k in (0..layers.len()).rev() {
        let mut g = layers[k].backprop(&mult);
        if k > 0 {
            for (i, gi) in g.iter_mut().enumerate() {
                let d_pre = tx.pre[k - 1][i] - tb.pre[k - 1][i];
                let d_post = tx.post[k - 1][i] - tb.post[k - 1][i];
                *gi *= rescale(d_pre, d_post, relu_grad(tb.pre[k - 1][i]));
            }
        }
        mult = g;
    }
    let values = mult
        .iter()
        .zip(x.iter().zip(baseline))
        .map(|(mj, (a, b))| mj * (a - b))
        .collect();
    let mut attr = Attribution::new(values, Method::DeepLift)?
        .with_meta("rescale_threshold", RESCALE_THRESHOLD);
    attr.baseline = Some(baseline.to_vec());
    Ok(attr)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::Dense;

    #[test]
    fn zero_delta_gives_zero() {
        let model = MlpModel::init(&[3, 4, 1], 5).unwrap();
        let a = deeplift_rescale(&model, &[0.1, 0.2, 0.3], &[0.1, 0.2, 0.3]).unwrap();
        assert_eq!(a.values, vec![0.0; 3]);
    }

    #[test]
    fn no_relu_switch_reduces_to_scaled_linear_rule() {
        // Hidden units active at both x and the baseline: the logit is linear,
        // so attributions are (Δp / Δz) * w_eff_j * Δx_j, i.e. the gradient of
        // the logit times the input delta, rescaled through the sigmoid.
        let l1 = Dense::new(2, 2, vec![1.0, 0.5, -0.5, 1.0], vec![3.0, 3.0]).unwrap();
        let l2 = Dense::new(2, 1, vec![0.8, -0.6], vec![0.1]).unwrap();
        let model = MlpModel::from_layers(vec![l1, l2]).unwrap();
        let x = [0.6, -0.4];
        let b = [0.1, 0.2];
        let tx = model.forward(&x).unwrap();
        let tb = model.forward(&b).unwrap();
        let w_eff = [0.8 * 1.0 + -0.6 * -0.5, 0.8 * 0.5 + -0.6 * 1.0];
        let scale = (tx.prob - tb.prob) / (tx.logit() - tb.logit());
        let a = deeplift_rescale(&model, &x, &b).unwrap();
        for j in 0..2 {
            assert!((a.values[j] - scale * w_eff[j] * (x[j] - b[j])).abs() < 1e-15);
        }
    }

    #[test]
    fn sums_to_delta() {
        let model = MlpModel::init(&[6, 10, 7, 1], 12).unwrap();
        let x = [0.5, -1.2, 0.3, 2.0, -0.4, 0.9];
        let b = [0.0; 6];
        let a = deeplift_rescale(&model, &x, &b).unwrap();
        let delta = model.predict_proba(&x).unwrap() - model.predict_proba(&b).unwrap();
        assert!((a.values.iter().sum::<f64>() - delta).abs() < 1e-12);
    }
}
