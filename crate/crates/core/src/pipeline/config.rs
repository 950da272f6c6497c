use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::attribution::{
    EnsembleParams, EnsembleWeighting, ExplainSpec, IgParams, LrpParams, Method,
};
use crate::data::{SplitSpec, SyntheticSpec};
use crate::error::{Error, Result};
use crate::neighbourhood::LambdaMode;
use crate::net::{FocalLossParams, RAdamConfig};

/// Full configuration of a run, read from TOML. Every field has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    pub data: DataConfig,
    pub split: SplitConfig,
    pub model: ModelConfig,
    pub train: TrainSection,
    pub loss: FocalLossParams,
    pub perturb: PerturbSection,
    pub gaussian: GaussianSection,
    pub explain: ExplainSection,
    pub evaluate: EvaluateSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out_dir: PathBuf::from("run"),
            data: DataConfig::default(),
            split: SplitConfig::default(),
            model: ModelConfig::default(),
            train: TrainSection::default(),
            loss: FocalLossParams::default(),
            perturb: PerturbSection::default(),
            gaussian: GaussianSection::default(),
            explain: ExplainSection::default(),
            evaluate: EvaluateSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// CSV input; when unset a synthetic dataset is drawn.
    pub csv: Option<PathBuf>,
    pub label_column: String,
    pub group_column: String,
    pub synthetic: SyntheticSection,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            csv: None,
            label_column: "label".into(),
            group_column: "group".into(),
            synthetic: SyntheticSection::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSection {
    pub n_points: usize,
    pub m_features: usize,
    pub minority_freq: f64,
    pub n_groups: usize,
    pub separation: f64,
}

impl Default for SyntheticSection {
    fn default() -> Self {
        let s = SyntheticSpec::default();
        Self {
            n_points: s.n_points,
            m_features: s.m_features,
            minority_freq: s.minority_freq,
            n_groups: s.n_groups,
            separation: s.separation,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub train_frac: f64,
    pub val_frac: f64,
    pub test_frac: f64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        let s = SplitSpec::default();
        Self {
            train_frac: s.train_frac,
            val_frac: s.val_frac,
            test_frac: s.test_frac,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub hidden: Vec<usize>,
    pub threshold: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            hidden: vec![64, 32, 16, 8],
            threshold: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: RAdamConfig,
}

impl Default for TrainSection {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_size: 256,
            learning_rate: 1e-4,
            optimizer: RAdamConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerturbSection {
    pub lambda: f64,
    pub n_target: usize,
    pub max_attempts: usize,
    pub k_nn: usize,
    pub locality_epsilon: Option<f64>,
    pub lambda_mode: LambdaMode,
    /// Candidates tried by `tune-lambda`.
    pub lambda_grid: Vec<f64>,
    pub min_acceptance: f64,
}

impl Default for PerturbSection {
    fn default() -> Self {
        Self {
            lambda: 0.05,
            n_target: 100,
            max_attempts: 2000,
            k_nn: 5,
            locality_epsilon: None,
            lambda_mode: LambdaMode::PerFeature,
            lambda_grid: vec![0.01, 0.02, 0.05, 0.1, 0.2],
            min_acceptance: 0.95,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaussianSection {
    pub sigma: f64,
}

impl Default for GaussianSection {
    fn default() -> Self {
        Self { sigma: 0.1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightingChoice {
    Uniform,
    Robustness,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExplainSection {
    pub methods: Vec<String>,
    pub ig_steps: usize,
    pub lrp_epsilon: f64,
    pub ensemble_weighting: WeightingChoice,
}

impl Default for ExplainSection {
    fn default() -> Self {
        Self {
            methods: Method::ALL.iter().map(|m| m.tag().to_string()).collect(),
            ig_steps: IgParams::DEFAULT_STEPS,
            lrp_epsilon: LrpParams::default().epsilon,
            ensemble_weighting: WeightingChoice::Uniform,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeneratorChoice {
    Medoid,
    Gaussian,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassFilter {
    Minority,
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateSection {
    pub generator: GeneratorChoice,
    pub classes: ClassFilter,
    /// Cap on scored test points per class, lowest row ids first.
    pub max_points: Option<usize>,
    pub histogram_bins: usize,
    pub dump_neighbourhoods: bool,
    pub dump_attributions: bool,
}

impl Default for EvaluateSection {
    fn default() -> Self {
        Self {
            generator: GeneratorChoice::Both,
            classes: ClassFilter::Minority,
            max_points: None,
            histogram_bins: 20,
            dump_neighbourhoods: false,
            dump_attributions: false,
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.synthetic_spec().validate()?;
        self.split_spec().validate()?;
        self.train_config().validate()?;
        self.loss.validate()?;
        self.perturb_config(0).validate()?;
        self.gaussian_config(0).validate()?;
        if self.model.hidden.contains(&0) {
            return Err(Error::InvalidConfig(
                "hidden layer widths must be positive".into(),
            ));
        }
        if self.perturb.k_nn == 0 {
            return Err(Error::InvalidConfig("k_nn must be at least 1".into()));
        }
        if self.perturb.lambda_grid.is_empty() {
            return Err(Error::InvalidConfig("lambda_grid is empty".into()));
        }
        for &l in &self.perturb.lambda_grid {
            crate::neighbourhood::mixing_distribution(l)?;
        }
        if !(self.perturb.min_acceptance > 0.0 && self.perturb.min_acceptance <= 1.0) {
            return Err(Error::InvalidConfig(
                "min_acceptance must lie in (0, 1]".into(),
            ));
        }
        if self.explain.ig_steps < 2 {
            return Err(Error::InvalidConfig("ig_steps must be at least 2".into()));
        }
        if !(self.explain.lrp_epsilon > 0.0) {
            return Err(Error::InvalidConfig("lrp_epsilon must be > 0".into()));
        }
        if self.evaluate.histogram_bins == 0 {
            return Err(Error::InvalidConfig(
                "histogram_bins must be at least 1".into(),
            ));
        }
        self.methods()?;
        Ok(())
    }

    /// Parsed method list, in configured order, without duplicates.
    pub fn methods(&self) -> Result<Vec<Method>> {
        if self.explain.methods.is_empty() {
            return Err(Error::InvalidConfig("method list is empty".into()));
        }
        let mut out: Vec<Method> = Vec::new();
        for tag in &self.explain.methods {
            let m: Method = tag.parse()?;
            if !out.contains(&m) {
                out.push(m);
            }
        }
        Ok(out)
    }

    pub fn explain_spec(&self, method: Method, m: usize) -> ExplainSpec {
        let mut spec =
            ExplainSpec::with_settings(method, m, self.explain.ig_steps, self.explain.lrp_epsilon);
        if let ExplainSpec::Ensemble(EnsembleParams { weighting, .. }) = &mut spec {
            if self.explain.ensemble_weighting == WeightingChoice::Robustness {
                *weighting = EnsembleWeighting::Robustness;
            }
        }
        spec
    }

    pub fn synthetic_spec(&self) -> SyntheticSpec {
        let s = &self.data.synthetic;
        SyntheticSpec {
            n_points: s.n_points,
            m_features: s.m_features,
            minority_freq: s.minority_freq,
            n_groups: s.n_groups,
            separation: s.separation,
            seed: crate::rng::derive_seed(self.seed, 0, "synth"),
        }
    }

    pub fn split_spec(&self) -> SplitSpec {
        SplitSpec {
            train_frac: self.split.train_frac,
            val_frac: self.split.val_frac,
            test_frac: self.split.test_frac,
            seed: crate::rng::derive_seed(self.seed, 0, "split"),
        }
    }

    pub fn train_config(&self) -> crate::net::TrainConfig {
        crate::net::TrainConfig {
            epochs: self.train.epochs,
            batch_size: self.train.batch_size,
            learning_rate: self.train.learning_rate,
            optimizer: self.train.optimizer,
            seed: crate::rng::derive_seed(self.seed, 0, "train"),
        }
    }

    pub fn model_dims(&self, m: usize) -> Vec<usize> {
        let mut dims = vec![m];
        dims.extend(&self.model.hidden);
        dims.push(1);
        dims
    }

    pub fn perturb_config(&self, seed: u64) -> crate::neighbourhood::PerturbConfig {
        let p = &self.perturb;
        crate::neighbourhood::PerturbConfig {
            lambda: p.lambda,
            n_target: p.n_target,
            max_attempts: p.max_attempts,
            locality_epsilon: p.locality_epsilon,
            lambda_mode: p.lambda_mode,
            threshold: self.model.threshold,
            seed,
        }
    }

    pub fn gaussian_config(&self, seed: u64) -> crate::neighbourhood::GaussianConfig {
        crate::neighbourhood::GaussianConfig {
            sigma: self.gaussian.sigma,
            n_target: self.perturb.n_target,
            max_attempts: self.perturb.max_attempts,
            threshold: self.model.threshold,
            seed,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_carry_reference_hyperparameters() {
        let c = RunConfig::default();
        assert_eq!((c.loss.gamma, c.loss.alpha), (2.5, 0.75));
        assert_eq!(
            (c.train.epochs, c.train.batch_size, c.train.learning_rate),
            (100, 256, 1e-4)
        );
        assert_eq!(
            (c.perturb.lambda, c.perturb.k_nn, c.perturb.n_target),
            (0.05, 5, 100)
        );
        assert_eq!(c.evaluate.classes, ClassFilter::Minority);
        assert_eq!(c.methods().unwrap(), Method::ALL.to_vec());
        c.validate().unwrap();
    }

    #[test]
    fn toml_round_trip_and_partial_files() {
        let c = RunConfig::default();
        assert_eq!(RunConfig::from_toml_str(&c.to_toml_string()).unwrap(), c);
        let partial = RunConfig::from_toml_str("seed = 4\n[perturb]\nlambda = 0.1\n").unwrap();
        assert_eq!(partial.seed, 4);
        assert_eq!(partial.perturb.lambda, 0.1);
        assert_eq!(partial.perturb.k_nn, 5);
    }

    #[test]
    fn rejects_bad_values() {
        for text in [
            "[explain]\nmethods = []\n",
            "[explain]\nmethods = [\"shap\"]\n",
            "[perturb]\nlambda = 1.5\n",
            "[split]\ntrain_frac = 0.9\n",
            "[gaussian]\nsigma = 0.0\n",
            "unknown_key = 1\n",
        ] {
            assert!(RunConfig::from_toml_str(text).is_err(), "{text}");
        }
    }
}
