use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_finite, check_len, Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Sigmoid,
}

/// Fully connected layer, `weights` row-major with shape `(n_out, n_in)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    n_in: usize,
    n_out: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl Dense {
    pub fn new(n_in: usize, n_out: usize, weights: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        if n_in == 0 || n_out == 0 {
            return Err(Error::InvalidConfig(
                "layer dimensions must be positive".into(),
            ));
        }
        check_len(n_in * n_out, weights.len())?;
        check_len(n_out, bias.len())?;
        check_finite(&weights, "layer weights")?;
        check_finite(&bias, "layer bias")?;
        Ok(Self {
            n_in,
            n_out,
            weights,
            bias,
        })
    }

    pub fn zeros(n_in: usize, n_out: usize) -> Self {
        Self {
            n_in,
            n_out,
            weights: vec![0.0; n_in * n_out],
            bias: vec![0.0; n_out],
        }
    }

    pub fn n_in(&self) -> usize {
        self.n_in
    }

    pub fn n_out(&self) -> usize {
        self.n_out
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    #[inline]
    pub fn weight(&self, out: usize, input: usize) -> f64 {
        self.weights[out * self.n_in + input]
    }

    pub(crate) fn params_mut(&mut self) -> [&mut [f64]; 2] {
        [&mut self.weights, &mut self.bias]
    }

    /// `z = W a + b`.
    pub fn affine(&self, input: &[f64]) -> Vec<f64> {
        self.weights
            .chunks_exact(self.n_in)
            .zip(&self.bias)
            .map(|(row, b)| row.iter().zip(input).map(|(w, a)| w * a).sum::<f64>() + b)
            .collect()
    }

    /// `W^T delta`.
    pub fn backprop(&self, delta: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_in];
        for (row, d) in self.weights.chunks_exact(self.n_in).zip(delta) {
            if *d == 0.0 {
                continue;
            }
            for (o, w) in out.iter_mut().zip(row) {
                *o += w * d;
            }
        }
        out
    }
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[inline]
pub(crate) fn relu(z: f64) -> f64 {
    if z > 0.0 {
        z
    } else {
        0.0
    }
}

/// ReLU derivative with the subgradient at exactly zero fixed to 0.
#[inline]
pub(crate) fn relu_grad(z: f64) -> f64 {
    if z > 0.0 {
        1.0
    } else {
        0.0
    }
}

/// Binary classifier: ReLU after every layer but the last, sigmoid on the
/// single output unit.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    layers: Vec<Dense>,
}

/// Default widths: m inputs, four hidden layers, one output.
pub fn default_dims(m: usize) -> Vec<usize> {
    vec![m, 64, 32, 16, 8, 1]
}

/// Pre- and post-activations of every layer for one input.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    pub input: Vec<f64>,
    pub pre: Vec<Vec<f64>>,
    pub post: Vec<Vec<f64>>,
    pub prob: f64,
}

impl ForwardTrace {
    pub fn logit(&self) -> f64 {
        self.pre.last().map(|z| z[0]).unwrap_or(0.0)
    }
}

impl MlpModel {
    pub fn from_layers(layers: Vec<Dense>) -> Result<Self> {
        let Some(last) = layers.last() else {
            return Err(Error::InvalidConfig(
                "model needs at least one layer".into(),
            ));
        };
        if last.n_out != 1 {
            return Err(Error::InvalidConfig(format!(
                "output layer must have one unit, has {}",
                last.n_out
            )));
        }
        for pair in layers.windows(2) {
            if pair[0].n_out != pair[1].n_in {
                return Err(Error::InvalidConfig(format!(
                    "layer dims do not chain: {} -> {}",
                    pair[0].n_out, pair[1].n_in
                )));
            }
        }
        Ok(Self { layers })
    }

    /// Uniform fan-in initialisation: weights and biases of a layer with
    /// `n_in` inputs are drawn from `U(-1/sqrt(n_in), 1/sqrt(n_in))`.
    pub fn init(dims: &[usize], seed: u64) -> Result<Self> {
        Self::check_dims(dims)?;
        let mut rng = rng::seeded(seed);
        let layers = dims
            .windows(2)
            .map(|w| {
                let bound = 1.0 / (w[0] as f64).sqrt();
                let mut draw = || rng.random_range(-bound..bound);
                let weights = (0..w[0] * w[1]).map(|_| draw()).collect();
                let bias = (0..w[1]).map(|_| draw()).collect();
                Dense::new(w[0], w[1], weights, bias)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_layers(layers)
    }

    pub fn zeros(dims: &[usize]) -> Result<Self> {
        Self::check_dims(dims)?;
        Self::from_layers(dims.windows(2).map(|w| Dense::zeros(w[0], w[1])).collect())
    }

    fn check_dims(dims: &[usize]) -> Result<()> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(Error::InvalidConfig(format!("invalid layer dims {dims:?}")));
        }
        Ok(())
    }

    pub fn n_inputs(&self) -> usize {
        self.layers[0].n_in
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn dims(&self) -> Vec<usize> {
        std::iter::once(self.n_inputs())
            .chain(self.layers.iter().map(|l| l.n_out))
            .collect()
    }

    pub fn activation(&self, layer: usize) -> Activation {
        if layer + 1 == self.layers.len() {
            Activation::Sigmoid
        } else {
            Activation::Relu
        }
    }

    pub(crate) fn params_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.params_mut())
            .collect()
    }

    pub fn forward(&self, x: &[f64]) -> Result<ForwardTrace> {
        check_len(self.n_inputs(), x.len())?;
        check_finite(x, "model input")?;
        Ok(self.forward_unchecked(x))
    }

    pub(crate) fn forward_unchecked(&self, x: &[f64]) -> ForwardTrace {
        let n = self.layers.len();
        let mut pre = Vec::with_capacity(n);
        let mut post: Vec<Vec<f64>> = Vec::with_capacity(n);
        for (k, layer) in self.layers.iter().enumerate() {
            let input = if k == 0 { x } else { post[k - 1].as_slice() };
            let z = layer.affine(input);
            let a: Vec<f64> = if k + 1 == n {
                z.iter().map(|&v| sigmoid(v)).collect()
            } else {
                z.iter().map(|&v| relu(v)).collect()
            };
            pre.push(z);
            post.push(a);
        }
        let prob = post[n - 1][0];
        ForwardTrace {
            input: x.to_vec(),
            pre,
            post,
            prob,
        }
    }

    pub fn predict_proba(&self, x: &[f64]) -> Result<f64> {
        Ok(self.forward(x)?.prob)
    }

    /// Class 1 iff `p >= threshold`.
    pub fn predict_class(&self, x: &[f64], threshold: f64) -> Result<u8> {
        if !(threshold > 0.0 && threshold < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "threshold {threshold} not in (0, 1)"
            )));
        }
        Ok(u8::from(self.predict_proba(x)? >= threshold))
    }

    fn check_trace(&self, trace: &ForwardTrace) -> Result<()> {
        check_len(self.layers.len(), trace.pre.len())?;
        check_len(self.layers.len(), trace.post.len())?;
        check_len(self.n_inputs(), trace.input.len())?;
        for (layer, z) in self.layers.iter().zip(&trace.pre) {
            check_len(layer.n_out, z.len())?;
        }
        Ok(())
    }

    /// `dp/dx` for the traced input.
    pub fn grad_input(&self, trace: &ForwardTrace) -> Result<Vec<f64>> {
        self.check_trace(trace)?;
        Ok(self.grad_input_unchecked(trace))
    }

    pub(crate) fn grad_input_unchecked(&self, trace: &ForwardTrace) -> Vec<f64> {
        let p = trace.prob;
        self.backprop_to_input(trace, vec![p * (1.0 - p)])
    }

    /// Propagates `d/d(logit)` back to the input through the ReLU stack.
    pub(crate) fn backprop_to_input(&self, trace: &ForwardTrace, mut delta: Vec<f64>) -> Vec<f64> {
        for k in (0..self.layers.len()).rev() {
            let mut g = self.layers[k].backprop(&delta);
            if k > 0 {
                for (gi, z) in g.iter_mut().zip(&trace.pre[k - 1]) {
                    *gi *= relu_grad(*z);
                }
            }
            delta = g;
        }
        delta
    }

    /// Accumulates parameter gradients for a loss with derivative `d_logit`
    /// with respect to the output pre-activation.
    pub(crate) fn accumulate_param_grads(
        &self,
        trace: &ForwardTrace,
        d_logit: f64,
        grads: &mut [Vec<f64>],
    ) {
        let mut delta = vec![d_logit];
        for k in (0..self.layers.len()).rev() {
            let layer = &self.layers[k];
            let input = if k == 0 {
                &trace.input
            } else {
                &trace.post[k - 1]
            };
            let (gw, rest) = grads[2 * k..].split_at_mut(1);
            let gw = &mut gw[0];
            let gb = &mut rest[0];
            for (o, d) in delta.iter().enumerate() {
                if *d == 0.0 {
                    continue;
                }
                gb[o] += d;
                let row = &mut gw[o * layer.n_in..(o + 1) * layer.n_in];
                for (g, a) in row.iter_mut().zip(input) {
                    *g += d * a;
                }
            }
            if k > 0 {
                let mut g = layer.backprop(&delta);
                for (gi, z) in g.iter_mut().zip(&trace.pre[k - 1]) {
                    *gi *= relu_grad(*z);
                }
                delta = g;
            }
        }
    }

    pub(crate) fn zero_grads(&self) -> Vec<Vec<f64>> {
        self.layers
            .iter()
            .flat_map(|l| [vec![0.0; l.weights.len()], vec![0.0; l.bias.len()]])
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_network_gives_half() {
        let m = MlpModel::zeros(&[3, 4, 1]).unwrap();
        let t = m.forward(&[1.0, -2.0, 3.0]).unwrap();
        assert_eq!(t.prob, 0.5);
        assert_eq!(t.pre.len(), 2);
    }

    #[test]
    fn hand_evaluated_two_two_one() {
        // h = relu([[1, -1], [0.5, 2]] x + [0, -1]); z = [2, -3] h + 0.5
        let l1 = Dense::new(2, 2, vec![1.0, -1.0, 0.5, 2.0], vec![0.0, -1.0]).unwrap();
        let l2 = Dense::new(2, 1, vec![2.0, -3.0], vec![0.5]).unwrap();
        let m = MlpModel::from_layers(vec![l1, l2]).unwrap();
        // x = [2, 1]: pre1 = [1, 2], h = [1, 2], z = 2 - 6 + 0.5 = -3.5
        let t = m.forward(&[2.0, 1.0]).unwrap();
        assert_eq!(t.pre[0], vec![1.0, 2.0]);
        assert_eq!(t.logit(), -3.5);
        assert!((t.prob - 1.0 / (1.0 + 3.5f64.exp())).abs() < 1e-15);
        // dp/dx = p(1-p) * [2*1 + (-3)*0.5, 2*(-1) + (-3)*2] = p(1-p) * [0.5, -8]
        let g = m.grad_input(&t).unwrap();
        let s = t.prob * (1.0 - t.prob);
        assert!((g[0] - 0.5 * s).abs() < 1e-15);
        assert!((g[1] + 8.0 * s).abs() < 1e-15);
    }

    #[test]
    fn nan_input_rejected() {
        let m = MlpModel::zeros(&[2, 1]).unwrap();
        assert!(matches!(
            m.forward(&[f64::NAN, 0.0]),
            Err(Error::NonFinite(_))
        ));
        assert!(matches!(
            m.forward(&[0.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn linear_model_gradient_closed_form() {
        let w = vec![0.3, -1.2, 2.0];
        let m =
            MlpModel::from_layers(vec![Dense::new(3, 1, w.clone(), vec![0.1]).unwrap()]).unwrap();
        let t = m.forward(&[0.5, 0.2, -0.4]).unwrap();
        let g = m.grad_input(&t).unwrap();
        let s = t.prob * (1.0 - t.prob);
        for (gj, wj) in g.iter().zip(&w) {
            assert!((gj - s * wj).abs() < 1e-15);
        }
    }

    #[test]
    fn dead_relu_region_has_zero_gradient() {
        let l1 = Dense::new(2, 2, vec![1.0, 1.0, 1.0, 1.0], vec![-10.0, -10.0]).unwrap();
        let l2 = Dense::new(2, 1, vec![1.0, 1.0], vec![0.0]).unwrap();
        let m = MlpModel::from_layers(vec![l1, l2]).unwrap();
        let t = m.forward(&[1.0, 2.0]).unwrap();
        assert_eq!(m.grad_input(&t).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn trace_model_mismatch() {
        let a = MlpModel::init(&[2, 3, 1], 0).unwrap();
        let b = MlpModel::init(&[2, 1], 0).unwrap();
        let t = b.forward(&[0.1, 0.2]).unwrap();
        assert!(a.grad_input(&t).is_err());
    }

    #[test]
    fn predict_class_threshold() {
        // logit = b so p is controlled directly.
        let with_p = |p: f64| {
            let b = (p / (1.0 - p)).ln();
            MlpModel::from_layers(vec![Dense::new(1, 1, vec![0.0], vec![b]).unwrap()]).unwrap()
        };
        assert_eq!(with_p(0.7).predict_class(&[0.0], 0.5).unwrap(), 1);
        assert_eq!(
            MlpModel::zeros(&[1, 1])
                .unwrap()
                .predict_class(&[0.0], 0.5)
                .unwrap(),
            1
        );
        assert_eq!(with_p(0.2).predict_class(&[0.0], 0.5).unwrap(), 0);
        assert!(with_p(0.2).predict_class(&[0.0], 1.0).is_err());
    }

    #[test]
    fn init_is_seeded_and_chains() {
        let a = MlpModel::init(&default_dims(8), 5).unwrap();
        assert_eq!(a, MlpModel::init(&default_dims(8), 5).unwrap());
        assert_eq!(a.dims(), vec![8, 64, 32, 16, 8, 1]);
        assert_eq!(a.layers().len(), 5);
        let bad = MlpModel::from_layers(vec![Dense::zeros(2, 3), Dense::zeros(4, 1)]);
        assert!(bad.is_err());
        assert!(MlpModel::from_layers(vec![Dense::zeros(2, 2)]).is_err());
    }
}
