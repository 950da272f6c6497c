//! Feature attributions for [`MlpModel`] predictions.
//!
//! Three backpropagation-based explainers (Integrated Gradients, DeepLIFT
//! with the Rescale rule, LRP with the ε rule) and an ensemble that averages
//! L1-normalized member attributions. [`explain`] dispatches on an
//! [`ExplainSpec`].

mod deeplift;
mod ensemble;
mod ig;
mod lrp;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use deeplift::{deeplift_rescale, RESCALE_THRESHOLD};
pub use ensemble::{ensemble, EnsembleParams, EnsembleWeighting};
pub use ig::{integrated_gradients, IgParams};
pub use lrp::{lrp_epsilon, lrp_epsilon_trace, LrpParams, LrpTrace};

use crate::error::{Error, Result};
use crate::net::MlpModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Ig,
    DeepLift,
    Lrp,
    Ensemble,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Ig, Method::DeepLift, Method::Lrp, Method::Ensemble];

    pub fn tag(self) -> &'static str {
        match self {
            Method::Ig => "ig",
            Method::DeepLift => "deeplift",
            Method::Lrp => "lrp",
            Method::Ensemble => "ensemble",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            Method::Ig => "Integrated Gradients",
            Method::DeepLift => "DeepLIFT",
            Method::Lrp => "LRP",
            Method::Ensemble => "Ensemble",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ig" | "integrated_gradients" | "integrated-gradients" => Ok(Method::Ig),
            "dl" | "deeplift" => Ok(Method::DeepLift),
            "lrp" => Ok(Method::Lrp),
            "ens" | "ensemble" => Ok(Method::Ensemble),
            _ => Err(Error::UnknownMethod(s.to_string())),
        }
    }
}

/// Markers for attributions that rank correlation cannot use as-is.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributionFlags {
    /// Every value is exactly zero.
    pub vanishing: bool,
    /// Ensemble members cancelled out to a zero vector.
    pub degenerate: bool,
    /// Ensemble members dropped for being zero vectors.
    pub dropped_members: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Attribution {
    pub values: Vec<f64>,
    pub method: Method,
    pub baseline: Option<Vec<f64>>,
    pub meta: BTreeMap<String, String>,
    pub flags: AttributionFlags,
}

impl Attribution {
    pub(crate) fn new(values: Vec<f64>, method: Method) -> Result<Self> {
        crate::error::check_finite(&values, "attribution")?;
        let vanishing = values.iter().all(|v| *v == 0.0);
        Ok(Self {
            values,
            method,
            baseline: None,
            meta: BTreeMap::new(),
            flags: AttributionFlags {
                vanishing,
                ..Default::default()
            },
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub(crate) fn with_meta(mut self, key: &str, value: impl ToString) -> Self {
        self.meta.insert(key.to_string(), value.to_string());
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExplainSpec {
    Ig(IgParams),
    DeepLift { baseline: Vec<f64> },
    Lrp(LrpParams),
    Ensemble(EnsembleParams),
}

impl ExplainSpec {
    pub fn method(&self) -> Method {
        match self {
            ExplainSpec::Ig(_) => Method::Ig,
            ExplainSpec::DeepLift { .. } => Method::DeepLift,
            ExplainSpec::Lrp(_) => Method::Lrp,
            ExplainSpec::Ensemble(_) => Method::Ensemble,
        }
    }

    /// Defaults for `m` standardized features: zero baselines, 64 IG steps,
    /// ε = 1e-6, and a uniform IG + DeepLIFT + LRP ensemble.
    pub fn default_for(method: Method, m: usize) -> Self {
        Self::with_settings(
            method,
            m,
            IgParams::DEFAULT_STEPS,
            LrpParams::default().epsilon,
        )
    }

    pub fn with_settings(method: Method, m: usize, ig_steps: usize, lrp_epsilon: f64) -> Self {
        match method {
            Method::Ig => ExplainSpec::Ig(IgParams {
                baseline: vec![0.0; m],
                steps: ig_steps,
            }),
            Method::DeepLift => ExplainSpec::DeepLift {
                baseline: vec![0.0; m],
            },
            Method::Lrp => ExplainSpec::Lrp(LrpParams {
                epsilon: lrp_epsilon,
            }),
            Method::Ensemble => ExplainSpec::Ensemble(EnsembleParams {
                members: [Method::Ig, Method::DeepLift, Method::Lrp]
                    .into_iter()
                    .map(|m2| Self::with_settings(m2, m, ig_steps, lrp_epsilon))
                    .collect(),
                weighting: EnsembleWeighting::Uniform,
            }),
        }
    }
}

pub fn explain(model: &MlpModel, x: &[f64], spec: &ExplainSpec) -> Result<Attribution> {
    match spec {
        ExplainSpec::Ig(p) => integrated_gradients(model, x, p),
        ExplainSpec::DeepLift { baseline } => deeplift_rescale(model, x, baseline),
        ExplainSpec::Lrp(p) => lrp_epsilon(model, x, p),
        ExplainSpec::Ensemble(p) => {
            p.validate()?;
            let members = p
                .members
                .iter()
                .map(|s| explain(model, x, s))
                .collect::<Result<Vec<_>>>()?;
            ensemble(&members, &p.weighting)
        }
    }
}

/// [`explain`] with the default parameters for a method tag.
pub fn explain_tag(model: &MlpModel, x: &[f64], tag: &str) -> Result<Attribution> {
    let method: Method = tag.parse()?;
    explain(
        model,
        x,
        &ExplainSpec::default_for(method, model.n_inputs()),
    )
}
