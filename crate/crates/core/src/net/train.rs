use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::loss::{focal_loss, focal_loss_grad_logit, FocalLossParams};
use super::model::MlpModel;
use super::optim::{RAdam, RAdamConfig};
use crate::data::Dataset;
use crate::error::{check_len, Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: RAdamConfig,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_size: 256,
            learning_rate: 1e-4,
            optimizer: RAdamConfig::default(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::InvalidConfig(
                "epochs and batch_size must be at least 1".into(),
            ));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig(
                "learning_rate must be finite and >= 0".into(),
            ));
        }
        self.optimizer.validate()
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: MlpModel,
    /// Mean focal loss over each epoch's samples, measured before each
    /// batch's update.
    pub loss_history: Vec<f64>,
}

/// Mini-batch training with the focal loss and rectified Adam.
///
/// The sample order is reshuffled every epoch from a stream seeded by
/// `cfg.seed`; the final epoch's parameters are returned.
pub fn train(
    model: &MlpModel,
    data: &Dataset,
    loss: &FocalLossParams,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    loss.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    check_len(model.n_inputs(), data.n_features())?;
    let n_pos = data.minority_count();
    if n_pos == 0 || n_pos == data.len() {
        return Err(Error::SingleClass("training set contains a single class"));
    }

    let mut model = model.clone();
    let mut grads = model.zero_grads();
    let shapes: Vec<usize> = grads.iter().map(Vec::len).collect();
    let mut opt = RAdam::new(cfg.optimizer, cfg.learning_rate, &shapes);
    let mut rng = rng::seeded(cfg.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);

    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            grads.iter_mut().for_each(|g| g.fill(0.0));
            for &i in batch {
                let trace = model.forward_unchecked(data.row(i));
                let y = data.label(i);
                epoch_loss += focal_loss(trace.prob, y, loss);
                let d = focal_loss_grad_logit(trace.prob, y, loss);
                model.accumulate_param_grads(&trace, d, &mut grads);
            }
            let scale = 1.0 / batch.len() as f64;
            grads.iter_mut().flatten().for_each(|g| *g *= scale);
            opt.step(model.params_mut(), &grads);
        }
        let mean = epoch_loss / data.len() as f64;
        if !mean.is_finite() {
            return Err(Error::NonFinite("training loss"));
        }
        history.push(mean);
    }
    Ok(TrainOutcome {
        model,
        loss_history: history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::model::sigmoid;

    fn separable() -> Dataset {
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..200 {
            let t = i as f64 / 200.0;
            let y = u8::from(i % 5 == 0);
            let s = if y == 1 { 1.0 } else { -1.0 };
            rows.push(vec![s * (1.0 + t), s * (0.5 + (t * 7.0).sin().abs())]);
            labels.push(y);
        }
        Dataset::new(
            rows,
            labels,
            vec!["g".into(); 200],
            vec!["a".into(), "b".into()],
        )
        .unwrap()
    }

    fn cfg(lr: f64) -> TrainConfig {
        TrainConfig {
            epochs: 30,
            batch_size: 16,
            learning_rate: lr,
            seed: 4,
            ..Default::default()
        }
    }

    #[test]
    fn loss_decreases_on_separable_data() {
        let model = MlpModel::init(&[2, 8, 4, 1], 1).unwrap();
        let out = train(
            &model,
            &separable(),
            &FocalLossParams::default(),
            &cfg(1e-2),
        )
        .unwrap();
        assert_eq!(out.loss_history.len(), 30);
        assert!(out.loss_history.last().unwrap() < out.loss_history.first().unwrap());
    }

    #[test]
    fn deterministic() {
        let model = MlpModel::init(&[2, 8, 4, 1], 1).unwrap();
        let a = train(
            &model,
            &separable(),
            &FocalLossParams::default(),
            &cfg(1e-3),
        )
        .unwrap();
        let b = train(
            &model,
            &separable(),
            &FocalLossParams::default(),
            &cfg(1e-3),
        )
        .unwrap();
        assert_eq!(a.model, b.model);
        assert_eq!(a.loss_history, b.loss_history);
    }

    #[test]
    fn zero_learning_rate_leaves_weights() {
        let model = MlpModel::init(&[2, 8, 4, 1], 1).unwrap();
        let out = train(&model, &separable(), &FocalLossParams::default(), &cfg(0.0)).unwrap();
        assert_eq!(out.model, model);
    }

    #[test]
    fn rejects_single_class() {
        let d = Dataset::new(
            vec![vec![1.0], vec![2.0]],
            vec![0, 0],
            vec!["g".into(); 2],
            vec!["a".into()],
        )
        .unwrap();
        let model = MlpModel::init(&[1, 1], 0).unwrap();
        assert!(matches!(
            train(&model, &d, &FocalLossParams::default(), &cfg(0.1)),
            Err(Error::SingleClass(_))
        ));
    }

    #[test]
    fn parameter_gradients_match_finite_differences() {
        let model = MlpModel::init(&[3, 5, 4, 1], 21).unwrap();
        let x = [0.3, -0.8, 1.1];
        let params = FocalLossParams::default();
        for y in [0u8, 1] {
            let trace = model.forward(&x).unwrap();
            let mut grads = model.zero_grads();
            model.accumulate_param_grads(
                &trace,
                focal_loss_grad_logit(trace.prob, y, &params),
                &mut grads,
            );
            let loss_at =
                |m: &MlpModel| focal_loss(sigmoid(m.forward(&x).unwrap().logit()), y, &params);
            for (t, g) in grads.iter().enumerate() {
                for (idx, &gi) in g.iter().enumerate() {
                    let h = 1e-6;
                    let mut plus = model.clone();
                    plus.params_mut()[t][idx] += h;
                    let mut minus = model.clone();
                    minus.params_mut()[t][idx] -= h;
                    let fd = (loss_at(&plus) - loss_at(&minus)) / (2.0 * h);
                    assert!(
                        (fd - gi).abs() < 1e-6 * gi.abs().max(1.0),
                        "tensor {t}[{idx}]"
                    );
                }
            }
        }
    }
}
