use rand::Rng;
use rand_distr::{Beta, Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

/// How mixing coefficients are drawn for one perturbation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LambdaMode {
    /// An independent coefficient per feature.
    #[default]
    PerFeature,
    /// One coefficient shared by all features.
    PerPoint,
}

/// `Beta(100λ, 100(1 - λ))`, mean λ.
pub fn mixing_distribution(lambda: f64) -> Result<Beta<f64>> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "lambda must lie in (0, 1), got {lambda}"
        )));
    }
    Beta::new(100.0 * lambda, 100.0 * (1.0 - lambda))
        .map_err(|e| Error::InvalidConfig(format!("beta({lambda}): {e}")))
}

/// `x̃_j = (1 - λ̄_j) x_j + λ̄_j x^M_j`, kept inside the segment even under rounding.
pub fn interpolate(x: &[f64], x_m: &[f64], lambdas: &[f64]) -> Result<Vec<f64>> {
    check_len(x.len(), x_m.len())?;
    check_len(x.len(), lambdas.len())?;
    Ok(x.iter()
        .zip(x_m)
        .zip(lambdas)
        .map(|((&a, &b), &l)| ((1.0 - l) * a + l * b).clamp(a.min(b), a.max(b)))
        .collect())
}

/// Draws the mixing coefficients for one perturbation.
pub fn draw_lambdas(beta: &Beta<f64>, m: usize, mode: LambdaMode, rng: &mut impl Rng) -> Vec<f64> {
    match mode {
        LambdaMode::PerFeature => (0..m).map(|_| beta.sample(rng)).collect(),
        LambdaMode::PerPoint => vec![beta.sample(rng); m],
    }
}

pub fn perturb_once(x: &[f64], x_m: &[f64], lambda: f64, rng: &mut impl Rng) -> Result<Vec<f64>> {
    perturb_with_mode(x, x_m, lambda, LambdaMode::PerFeature, rng)
}

pub fn perturb_with_mode(
    x: &[f64],
    x_m: &[f64],
    lambda: f64,
    mode: LambdaMode,
    rng: &mut impl Rng,
) -> Result<Vec<f64>> {
    let beta = mixing_distribution(lambda)?;
    interpolate(x, x_m, &draw_lambdas(&beta, x.len(), mode, rng))
}

pub fn gaussian_noise(x: &[f64], normal: &Normal<f64>, rng: &mut impl Rng) -> Vec<f64> {
    x.iter().map(|v| v + normal.sample(rng)).collect()
}
