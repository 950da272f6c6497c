use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{check_len, Error, Result};

/// Per-feature mean and population standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizationStats {
    pub means: Vec<f64>,
    pub std_devs: Vec<f64>,
}

impl StandardizationStats {
    pub fn n_features(&self) -> usize {
        self.means.len()
    }

    pub fn apply_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.means.iter().zip(&self.std_devs))
            .map(|(x, (mu, sd))| (x - mu) / sd)
            .collect()
    }

    pub fn invert_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.means.iter().zip(&self.std_devs))
            .map(|(z, (mu, sd))| z * sd + mu)
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        check_len(self.means.len(), self.std_devs.len())?;
        if self.std_devs.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::InvalidConfig(
                "standard deviations must be positive".into(),
            ));
        }
        crate::error::check_finite(&self.means, "standardization means")
    }
}

/// Fits means and population (divide-by-N) standard deviations over `fit_rows`.
pub fn fit_standardize(data: &Dataset, fit_rows: &[usize]) -> Result<StandardizationStats> {
    if fit_rows.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let m = data.n_features();
    let n = fit_rows.len() as f64;
    let mut means = vec![0.0; m];
    for &i in fit_rows {
        for (acc, x) in means.iter_mut().zip(data.row(i)) {
            *acc += x;
        }
    }
    means.iter_mut().for_each(|v| *v /= n);

    // Two-pass variance: the centred sum keeps the round-trip error small.
    let mut vars = vec![0.0; m];
    for &i in fit_rows {
        for ((acc, x), mu) in vars.iter_mut().zip(data.row(i)).zip(&means) {
            *acc += (x - mu) * (x - mu);
        }
    }
    let mut std_devs = Vec::with_capacity(m);
    for (j, v) in vars.into_iter().enumerate() {
        let sd = (v / n).sqrt();
        if !(sd > f64::EPSILON * means[j].abs().max(1.0)) {
            return Err(Error::ConstantFeature(data.feature_names()[j].clone()));
        }
        std_devs.push(sd);
    }
    Ok(StandardizationStats { means, std_devs })
}

pub fn apply_standardize(data: &Dataset, stats: &StandardizationStats) -> Result<Dataset> {
    check_len(data.n_features(), stats.n_features())?;
    let features = data.rows().flat_map(|r| stats.apply_row(r)).collect();
    Ok(data.with_features(features))
}

pub fn invert_standardize(data: &Dataset, stats: &StandardizationStats) -> Result<Dataset> {
    check_len(data.n_features(), stats.n_features())?;
    let features = data.rows().flat_map(|r| stats.invert_row(r)).collect();
    Ok(data.with_features(features))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn column(values: &[f64]) -> Dataset {
        Dataset::new(
            values.iter().map(|&v| vec![v]).collect(),
            vec![0; values.len()],
            vec!["g".into(); values.len()],
            vec!["x".into()],
        )
        .unwrap()
    }

    #[test]
    fn two_point_population_std() {
        let d = column(&[1.0, 3.0]);
        let s = fit_standardize(&d, &[0, 1]).unwrap();
        assert_eq!(s.means, vec![2.0]);
        assert_eq!(s.std_devs, vec![1.0]);
    }

    #[test]
    fn constant_column_rejected() {
        let d = column(&[5.0, 5.0, 5.0]);
        assert!(
            matches!(fit_standardize(&d, &[0, 1, 2]), Err(Error::ConstantFeature(f)) if f == "x")
        );
    }

    #[test]
    fn fits_only_requested_rows() {
        let d = column(&[1.0, 3.0, 100.0]);
        let s = fit_standardize(&d, &[0, 1]).unwrap();
        assert_eq!(s.means, vec![2.0]);
    }

    #[test]
    fn centering_and_scaling() {
        let stats = StandardizationStats {
            means: vec![2.0],
            std_devs: vec![1.0],
        };
        assert_eq!(stats.apply_row(&[2.0]), vec![0.0]);
        let stats = StandardizationStats {
            means: vec![2.0],
            std_devs: vec![2.0],
        };
        assert_eq!(stats.apply_row(&[4.0]), vec![1.0]);
        assert!(apply_standardize(
            &column(&[1.0]),
            &StandardizationStats {
                means: vec![0.0, 0.0],
                std_devs: vec![1.0, 1.0],
            }
        )
        .is_err());
    }

    #[test]
    fn standardized_column_is_idempotent() {
        let d = column(&[-1.5, 0.25, 3.0, 7.0, 2.0]);
        let rows: Vec<usize> = (0..d.len()).collect();
        let z = apply_standardize(&d, &fit_standardize(&d, &rows).unwrap()).unwrap();
        let s = fit_standardize(&z, &rows).unwrap();
        assert!(s.means[0].abs() < 1e-9);
        assert!((s.std_devs[0] - 1.0).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn round_trip_recovers_inputs(values in prop::collection::vec(-1e3f64..1e3, 2..40)) {
            prop_assume!(values.iter().any(|v| (v - values[0]).abs() > 1e-3));
            let d = column(&values);
            let rows: Vec<usize> = (0..d.len()).collect();
            let stats = fit_standardize(&d, &rows).unwrap();
            let back = invert_standardize(&apply_standardize(&d, &stats).unwrap(), &stats).unwrap();
            for (a, b) in d.features().iter().zip(back.features()) {
                prop_assert!((a - b).abs() <= 1e-10 * a.abs().max(1.0));
            }
        }
    }
}
