//! Neighbourhoods of same-class perturbations around an anchor point.
//!
//! The medoid generator mixes the anchor toward a nearby validation medoid
//! with Beta-distributed coefficients; the Gaussian generator adds isotropic
//! noise. Both discard perturbations whose predicted class differs from the
//! anchor's.

mod io;
mod kmedoids;
mod perturb;

use std::fmt;

use rand_distr::Normal;
use serde::{Deserialize, Serialize};

pub use io::{load_index, save_index, write_neighbourhoods, INDEX_VERSION};
pub use kmedoids::{
    build_medoid_index, build_medoid_index_with_k, euclidean, pam, MedoidIndex, PamResult,
    CLUSTER_SIZE, DEFAULT_MAX_ITER,
};
pub use perturb::{
    draw_lambdas, gaussian_noise, interpolate, mixing_distribution, perturb_once,
    perturb_with_mode, LambdaMode,
};

use crate::error::{check_len, Error, Result};
use crate::net::MlpModel;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Generator {
    Medoid,
    Gaussian,
}

impl Generator {
    pub fn tag(self) -> &'static str {
        match self {
            Generator::Medoid => "medoid",
            Generator::Gaussian => "gaussian",
        }
    }
}

impl fmt::Display for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub attempts: usize,
    pub accepted: usize,
    pub rejected_class: usize,
    pub rejected_locality: usize,
    pub dropped_duplicates: usize,
}

impl GenerationStats {
    pub fn acceptance_rate(&self) -> f64 {
        if self.attempts == 0 {
            0.0
        } else {
            self.accepted as f64 / self.attempts as f64
        }
    }
}

impl fmt::Display for GenerationStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} attempts, {} accepted, {} changed class, {} outside locality, {} duplicates",
            self.attempts,
            self.accepted,
            self.rejected_class,
            self.rejected_locality,
            self.dropped_duplicates
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbConfig {
    pub lambda: f64,
    pub n_target: usize,
    pub max_attempts: usize,
    pub locality_epsilon: Option<f64>,
    pub lambda_mode: LambdaMode,
    pub threshold: f64,
    pub seed: u64,
}

impl Default for PerturbConfig {
    fn default() -> Self {
        Self {
            lambda: 0.05,
            n_target: 100,
            max_attempts: 2000,
            locality_epsilon: None,
            lambda_mode: LambdaMode::PerFeature,
            threshold: 0.5,
            seed: 0,
        }
    }
}

impl PerturbConfig {
    pub fn validate(&self) -> Result<()> {
        mixing_distribution(self.lambda)?;
        validate_common(self.n_target, self.max_attempts, self.threshold)?;
        if let Some(eps) = self.locality_epsilon {
            if !(eps > 0.0 && eps.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "locality_epsilon must be > 0, got {eps}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianConfig {
    pub sigma: f64,
    pub n_target: usize,
    pub max_attempts: usize,
    pub threshold: f64,
    pub seed: u64,
}

impl Default for GaussianConfig {
    fn default() -> Self {
        Self {
            sigma: 0.1,
            n_target: 100,
            max_attempts: 2000,
            threshold: 0.5,
            seed: 0,
        }
    }
}

impl GaussianConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "sigma must be > 0, got {}",
                self.sigma
            )));
        }
        validate_common(self.n_target, self.max_attempts, self.threshold)
    }
}

fn validate_common(n_target: usize, max_attempts: usize, threshold: f64) -> Result<()> {
    if n_target == 0 {
        return Err(Error::InvalidConfig("n_target must be at least 1".into()));
    }
    if max_attempts < n_target {
        return Err(Error::InvalidConfig(format!(
            "max_attempts ({max_attempts}) below n_target ({n_target})"
        )));
    }
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "threshold must lie in (0, 1), got {threshold}"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Member {
    pub point: Vec<f64>,
    pub distance: f64,
    /// Medoid slot mixed toward; `None` for Gaussian members.
    pub mixing_medoid: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Neighbourhood {
    pub anchor: Vec<f64>,
    pub anchor_class: u8,
    pub members: Vec<Member>,
    pub generator: Generator,
    pub stats: GenerationStats,
}

impl Neighbourhood {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn distances(&self) -> Vec<f64> {
        self.members.iter().map(|m| m.distance).collect()
    }
}

/// Shared accept/reject loop. `propose` returns a candidate and its medoid slot.
#[allow(clippy::too_many_arguments)]
fn collect<F>(
    model: &MlpModel,
    x: &[f64],
    generator: Generator,
    n_target: usize,
    max_attempts: usize,
    threshold: f64,
    locality: Option<f64>,
    mut propose: F,
) -> Result<Neighbourhood>
where
    F: FnMut() -> Result<(Vec<f64>, Option<usize>)>,
{
    check_len(model.n_inputs(), x.len())?;
    let anchor_class = model.predict_class(x, threshold)?;
    let mut stats = GenerationStats::default();
    let mut members = Vec::with_capacity(n_target);
    while members.len() < n_target && stats.attempts < max_attempts {
        stats.attempts += 1;
        let (point, mixing_medoid) = propose()?;
        if model.predict_class(&point, threshold)? != anchor_class {
            stats.rejected_class += 1;
            continue;
        }
        let distance = euclidean(x, &point);
        if !(distance > 0.0) {
            stats.dropped_duplicates += 1;
            continue;
        }
        if locality.is_some_and(|eps| distance >= eps) {
            stats.rejected_locality += 1;
            continue;
        }
        stats.accepted += 1;
        members.push(Member {
            point,
            distance,
            mixing_medoid,
        });
    }
    if members.is_empty() {
        return Err(Error::UnstablePoint(stats));
    }
    Ok(Neighbourhood {
        anchor: x.to_vec(),
        anchor_class,
        members,
        generator,
        stats,
    })
}

/// Medoid-mixing neighbourhood: repeatedly picks a neighbouring medoid,
/// interpolates toward it and keeps same-class results.
pub fn generate_neighbourhood(
    model: &MlpModel,
    x: &[f64],
    index: &MedoidIndex,
    cfg: &PerturbConfig,
) -> Result<Neighbourhood> {
    cfg.validate()?;
    let beta = mixing_distribution(cfg.lambda)?;
    let mut r = rng::seeded(cfg.seed);
    collect(
        model,
        x,
        Generator::Medoid,
        cfg.n_target,
        cfg.max_attempts,
        cfg.threshold,
        cfg.locality_epsilon,
        || {
            let slot = index.pick_mixing_medoid(x, &mut r)?;
            let lambdas = draw_lambdas(&beta, x.len(), cfg.lambda_mode, &mut r);
            Ok((interpolate(x, &index.medoids[slot], &lambdas)?, Some(slot)))
        },
    )
}

pub fn generate_gaussian_neighbourhood(
    model: &MlpModel,
    x: &[f64],
    cfg: &GaussianConfig,
) -> Result<Neighbourhood> {
    cfg.validate()?;
    let normal = Normal::new(0.0, cfg.sigma).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let mut r = rng::seeded(cfg.seed);
    collect(
        model,
        x,
        Generator::Gaussian,
        cfg.n_target,
        cfg.max_attempts,
        cfg.threshold,
        None,
        || Ok((gaussian_noise(x, &normal, &mut r), None)),
    )
}

/// Unfiltered class preservation: draws `n_draws` medoid perturbations of
/// `x` and counts those predicted in the anchor's class.
pub fn class_preservation(
    model: &MlpModel,
    x: &[f64],
    index: &MedoidIndex,
    cfg: &PerturbConfig,
    n_draws: usize,
) -> Result<(usize, usize)> {
    cfg.validate()?;
    let beta = mixing_distribution(cfg.lambda)?;
    let mut r = rng::seeded(cfg.seed);
    let anchor_class = model.predict_class(x, cfg.threshold)?;
    let mut kept = 0;
    for _ in 0..n_draws {
        let slot = index.pick_mixing_medoid(x, &mut r)?;
        let lambdas = draw_lambdas(&beta, x.len(), cfg.lambda_mode, &mut r);
        let p = interpolate(x, &index.medoids[slot], &lambdas)?;
        if model.predict_class(&p, cfg.threshold)? == anchor_class {
            kept += 1;
        }
    }
    Ok((kept, n_draws))
}
