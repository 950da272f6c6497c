//! Versioned JSON model files and loss-history CSV.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::{Activation, Dense, MlpModel};
use crate::data::StandardizationStats;
use crate::error::{Error, Result};

pub const MODEL_FORMAT: &str = "relexplain-mlp";
pub const MODEL_VERSION: u32 = 1;

/// A model plus the preprocessing it was trained with.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelBundle {
    pub model: MlpModel,
    pub standardization: Option<StandardizationStats>,
    pub feature_names: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
}

#[derive(Serialize, Deserialize)]
struct LayerDoc {
    n_in: usize,
    n_out: usize,
    activation: Activation,
    weights: Vec<f64>,
    bias: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ModelDoc {
    format: String,
    version: u32,
    layers: Vec<LayerDoc>,
    standardization: Option<StandardizationStats>,
    feature_names: Vec<String>,
}

pub fn save_model(path: &Path, bundle: &ModelBundle) -> Result<()> {
    let model = &bundle.model;
    let doc = ModelDoc {
        format: MODEL_FORMAT.into(),
        version: MODEL_VERSION,
        layers: model
            .layers()
            .iter()
            .enumerate()
            .map(|(k, l)| LayerDoc {
                n_in: l.n_in(),
                n_out: l.n_out(),
                activation: model.activation(k),
                weights: l.weights().to_vec(),
                bias: l.bias().to_vec(),
            })
            .collect(),
        standardization: bundle.standardization.clone(),
        feature_names: bundle.feature_names.clone(),
    };
    let text = serde_json::to_string_pretty(&doc).expect("model document serializes");
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<ModelBundle> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let corrupt = |reason: String| Error::Corrupt {
        path: path.to_path_buf(),
        reason,
    };
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| corrupt(e.to_string()))?;
    let header: Header =
        serde_json::from_value(value.clone()).map_err(|e| corrupt(e.to_string()))?;
    if header.format != MODEL_FORMAT {
        return Err(corrupt(format!(
            "unexpected format tag '{}'",
            header.format
        )));
    }
    if header.version != MODEL_VERSION {
        return Err(Error::VersionMismatch {
            expected: MODEL_VERSION,
            found: header.version,
        });
    }
    let doc: ModelDoc = serde_json::from_value(value).map_err(|e| corrupt(e.to_string()))?;
    let n = doc.layers.len();
    let mut layers = Vec::with_capacity(n);
    for (k, l) in doc.layers.into_iter().enumerate() {
        let expected = if k + 1 == n {
            Activation::Sigmoid
        } else {
            Activation::Relu
        };
        if l.activation != expected {
            return Err(corrupt(format!(
                "layer {k}: unsupported activation {:?}",
                l.activation
            )));
        }
        layers.push(
            Dense::new(l.n_in, l.n_out, l.weights, l.bias).map_err(|e| corrupt(e.to_string()))?,
        );
    }
    let model = MlpModel::from_layers(layers).map_err(|e| corrupt(e.to_string()))?;
    if let Some(stats) = &doc.standardization {
        stats.validate().map_err(|e| corrupt(e.to_string()))?;
        if stats.n_features() != model.n_inputs() {
            return Err(corrupt(
                "standardization width differs from model input".into(),
            ));
        }
    }
    Ok(ModelBundle {
        model,
        standardization: doc.standardization,
        feature_names: doc.feature_names,
    })
}

pub fn write_loss_history(path: &Path, history: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["epoch", "mean_loss"])?;
    for (e, loss) in history.iter().enumerate() {
        w.write_record([(e + 1).to_string(), loss.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::Rng;

    fn bundle() -> ModelBundle {
        ModelBundle {
            model: MlpModel::init(&[4, 6, 3, 1], 8).unwrap(),
            standardization: Some(StandardizationStats {
                means: vec![0.1, 0.2, 0.3, 1.0 / 3.0],
                std_devs: vec![1.0, 2.0, 0.5, 1.0 / 7.0],
            }),
            feature_names: (0..4).map(|j| format!("f{j}")).collect(),
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let b = bundle();
        save_model(&path, &b).unwrap();
        let back = load_model(&path).unwrap();
        assert_eq!(back, b);
        let mut r = rng::seeded(0);
        for _ in 0..100 {
            let x: Vec<f64> = (0..4).map(|_| r.random_range(-3.0..3.0)).collect();
            assert_eq!(
                b.model.predict_proba(&x).unwrap().to_bits(),
                back.model.predict_proba(&x).unwrap().to_bits()
            );
        }
    }

    #[test]
    fn truncated_file_is_corrupt() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        save_model(&path, &bundle()).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        std::fs::write(&path, &text[..text.len() / 2]).unwrap();
        assert!(matches!(load_model(&path), Err(Error::Corrupt { .. })));
    }

    #[test]
    fn wrong_version_names_both() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        save_model(&path, &bundle()).unwrap();
        let text = std::fs::read_to_string(&path)
            .unwrap()
            .replace("\"version\": 1", "\"version\": 7");
        std::fs::write(&path, text).unwrap();
        let err = load_model(&path).unwrap_err();
        assert!(matches!(
            err,
            Error::VersionMismatch {
                expected: 1,
                found: 7
            }
        ));
        assert!(err.to_string().contains("expected 1, found 7"));
    }
}
