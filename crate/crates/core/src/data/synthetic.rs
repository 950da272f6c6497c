use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};
use crate::rng;

/// Parameters of the two-class Gaussian-mixture generator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub n_points: usize,
    pub m_features: usize,
    pub minority_freq: f64,
    pub n_groups: usize,
    pub separation: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n_points: 50_000,
            m_features: 8,
            minority_freq: 0.01,
            n_groups: 200,
            separation: 3.0,
            seed: 0,
        }
    }
}

/// Half-distance between the two components of each class.
const COMPONENT_OFFSET: f64 = 1.0;
/// Standard deviation of the per-group location offset.
const GROUP_SPREAD: f64 = 0.5;

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.m_features == 0 {
            return Err(Error::InvalidConfig("m_features must be at least 1".into()));
        }
        if !(self.minority_freq > 0.0 && self.minority_freq < 0.5) {
            return Err(Error::InvalidConfig(format!(
                "minority_freq must lie in (0, 0.5), got {}",
                self.minority_freq
            )));
        }
        if self.n_points < 2 || self.n_groups == 0 {
            return Err(Error::InvalidConfig(
                "need n_points >= 2 and n_groups >= 1".into(),
            ));
        }
        if !(self.separation >= 0.0 && self.separation.is_finite()) {
            return Err(Error::InvalidConfig(
                "separation must be finite and >= 0".into(),
            ));
        }
        Ok(())
    }

    /// Exact number of minority rows produced: `round(n * freq)`, at least 1.
    pub fn minority_count(&self) -> usize {
        ((self.n_points as f64 * self.minority_freq).round() as usize).clamp(1, self.n_points - 1)
    }
}

/// Component means for one class. They depend only on `m`, `separation` and
/// the class, never on the seed, so draws with different seeds share the
/// same class geometry and differ only in group locations and noise.
fn component_means(m: usize, separation: f64, minority: bool) -> [Vec<f64>; 2] {
    let norm = (m as f64).sqrt();
    // Alternating-sign axis between the two components, all-ones shift
    // direction between the classes (orthogonal when m is even).
    let axis: Vec<f64> = (0..m)
        .map(|j| if j % 2 == 0 { 1.0 } else { -1.0 } / norm)
        .collect();
    let shift = if minority { separation / norm } else { 0.0 };
    let make = |sign: f64| {
        axis.iter()
            .map(|a| sign * COMPONENT_OFFSET * a + shift)
            .collect()
    };
    [make(1.0), make(-1.0)]
}

/// Raw-unit scale and offset of feature `j`, so that standardization has work to do.
fn raw_units(j: usize) -> (f64, f64) {
    (1.0 + 0.5 * j as f64, 10.0 * j as f64 - 20.0)
}

/// Draws an unbalanced two-class dataset.
///
/// Each class is an equal mixture of two unit-variance Gaussians; the
/// minority components are the majority ones shifted by `separation` along
/// the all-ones direction. Every group has its own location offset added to
/// all of its rows, so group membership carries information. The minority
/// count is exactly [`SyntheticSpec::minority_count`].
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Dataset> {
    spec.validate()?;
    let m = spec.m_features;
    let n = spec.n_points;
    let mut rng = rng::seeded(spec.seed);

    let offsets: Vec<Vec<f64>> = (0..spec.n_groups)
        .map(|_| {
            (0..m)
                .map(|_| GROUP_SPREAD * rng.sample::<f64, _>(StandardNormal))
                .collect()
        })
        .collect();
    let majority = component_means(m, spec.separation, false);
    let minority = component_means(m, spec.separation, true);

    let n_min = spec.minority_count();
    let mut labels: Vec<u8> = (0..n).map(|i| u8::from(i < n_min)).collect();
    labels.shuffle(&mut rng);

    let mut features = Vec::with_capacity(n * m);
    let mut groups = Vec::with_capacity(n);
    for &y in &labels {
        let g = rng.random_range(0..spec.n_groups);
        let comp = usize::from(rng.random_bool(0.5));
        let mean = if y == 1 {
            &minority[comp]
        } else {
            &majority[comp]
        };
        for j in 0..m {
            let z: f64 = StandardNormal.sample(&mut rng);
            let (scale, shift) = raw_units(j);
            features.push((mean[j] + offsets[g][j] + z) * scale + shift);
        }
        groups.push(format!("g{g:04}"));
    }
    let names = (0..m).map(|j| format!("x{j}")).collect();
    Dataset::from_flat(features, m, labels, groups, names)
}
