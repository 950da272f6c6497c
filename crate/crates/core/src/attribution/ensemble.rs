use std::collections::HashSet;

use super::{Attribution, ExplainSpec, Method};
use crate::error::{check_len, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum EnsembleWeighting {
    Uniform,
    /// One non-negative weight per member, summing to 1.
    Custom(Vec<f64>),
    /// Weights proportional to each member's local robustness on the
    /// point's neighbourhood; resolved by the scoring pipeline.
    Robustness,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleParams {
    pub members: Vec<ExplainSpec>,
    pub weighting: EnsembleWeighting,
}

impl EnsembleParams {
    pub fn validate(&self) -> Result<()> {
        if self.members.is_empty() {
            return Err(Error::EmptyEnsemble);
        }
        let mut seen = HashSet::new();
        for m in &self.members {
            let method = m.method();
            if method == Method::Ensemble {
                return Err(Error::InvalidConfig("ensembles cannot be nested".into()));
            }
            if !seen.insert(method) {
                return Err(Error::InvalidConfig(format!(
                    "duplicate ensemble member {method}"
                )));
            }
        }
        if let EnsembleWeighting::Custom(w) = &self.weighting {
            check_len(self.members.len(), w.len())?;
        }
        if self.weighting == EnsembleWeighting::Robustness {
            return Err(Error::InvalidConfig(
                "robustness weighting needs a neighbourhood; score the point instead".into(),
            ));
        }
        Ok(())
    }
}

/// L1-normalizes each member, drops all-zero members, and takes the
/// weighted mean of the rest (weights renormalized over kept members).
pub fn ensemble(members: &[Attribution], weighting: &EnsembleWeighting) -> Result<Attribution> {
    let Some(first) = members.first() else {
        return Err(Error::EmptyEnsemble);
    };
    let m = first.len();
    for a in members {
        check_len(m, a.len())?;
    }
    let weights = match weighting {
        EnsembleWeighting::Uniform | EnsembleWeighting::Robustness => vec![1.0; members.len()],
        EnsembleWeighting::Custom(w) => {
            check_len(members.len(), w.len())?;
            if w.iter().any(|v| !(*v >= 0.0)) || (w.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidConfig(format!(
                    "ensemble weights must be non-negative and sum to 1, got {w:?}"
                )));
            }
            w.clone()
        }
    };

    let mut values = vec![0.0; m];
    let mut total_weight = 0.0;
    let mut dropped = 0;
    for (a, w) in members.iter().zip(&weights) {
        let l1: f64 = a.values.iter().map(|v| v.abs()).sum();
        if !(l1 > 0.0) {
            dropped += 1;
            continue;
        }
        total_weight += w;
        for (acc, v) in values.iter_mut().zip(&a.values) {
            *acc += w * v / l1;
        }
    }
    if dropped == members.len() || !(total_weight > 0.0) {
        return Err(Error::AllZeroEnsemble);
    }
    values.iter_mut().for_each(|v| *v /= total_weight);

    let mut out = Attribution::new(values, Method::Ensemble)?;
    out.flags.dropped_members = dropped;
    out.flags.degenerate = out.flags.vanishing;
    let tags: Vec<&str> = members.iter().map(|a| a.method.tag()).collect();
    let weighting_tag = match weighting {
        EnsembleWeighting::Uniform => "uniform".to_string(),
        EnsembleWeighting::Custom(w) => format!("custom:{w:?}"),
        EnsembleWeighting::Robustness => "robustness".to_string(),
    };
    Ok(out
        .with_meta("members", tags.join(","))
        .with_meta("weighting", weighting_tag))
}
