//! Tabular datasets: representation, CSV ingestion, standardization,
//! group-aware splitting and a synthetic unbalanced generator.

mod csv_io;
mod split;
mod standardize;
mod synthetic;

pub use csv_io::{load_csv, read_split_manifest, write_csv, write_split_manifest};
pub use split::{stratified_group_split, Split, SplitSpec};
pub use standardize::{
    apply_standardize, fit_standardize, invert_standardize, StandardizationStats,
};
pub use synthetic::{generate_synthetic, SyntheticSpec};

use crate::error::{check_len, Error, Result};

/// Feature matrix (row-major), binary labels and per-row group keys.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    n_features: usize,
    labels: Vec<u8>,
    group_keys: Vec<String>,
    feature_names: Vec<String>,
}

impl Dataset {
    pub fn new(
        rows: Vec<Vec<f64>>,
        labels: Vec<u8>,
        group_keys: Vec<String>,
        feature_names: Vec<String>,
    ) -> Result<Self> {
        let m = feature_names.len();
        let mut features = Vec::with_capacity(rows.len() * m);
        for row in &rows {
            check_len(m, row.len())?;
            features.extend_from_slice(row);
        }
        Self::from_flat(features, m, labels, group_keys, feature_names)
    }

    pub fn from_flat(
        features: Vec<f64>,
        n_features: usize,
        labels: Vec<u8>,
        group_keys: Vec<String>,
        feature_names: Vec<String>,
    ) -> Result<Self> {
        if n_features == 0 {
            return Err(Error::InvalidConfig(
                "dataset needs at least one feature".into(),
            ));
        }
        check_len(n_features, feature_names.len())?;
        check_len(labels.len() * n_features, features.len())?;
        check_len(labels.len(), group_keys.len())?;
        if labels.is_empty() {
            return Err(Error::EmptyDataset);
        }
        crate::error::check_finite(&features, "dataset features")?;
        if let Some(row) = labels.iter().position(|&y| y > 1) {
            return Err(Error::BadLabel {
                row,
                value: labels[row].to_string(),
            });
        }
        Ok(Self {
            features,
            n_features,
            labels,
            group_keys,
            feature_names,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.features.chunks_exact(self.n_features)
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> u8 {
        self.labels[i]
    }

    pub fn group_keys(&self) -> &[String] {
        &self.group_keys
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn minority_count(&self) -> usize {
        self.labels.iter().filter(|&&y| y == 1).count()
    }

    /// Copies the given rows, in the given order, into a new dataset.
    pub fn subset(&self, rows: &[usize]) -> Result<Self> {
        let mut features = Vec::with_capacity(rows.len() * self.n_features);
        let mut labels = Vec::with_capacity(rows.len());
        let mut groups = Vec::with_capacity(rows.len());
        for &i in rows {
            if i >= self.len() {
                return Err(Error::InvalidConfig(format!(
                    "row index {i} out of range for {} rows",
                    self.len()
                )));
            }
            features.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
            groups.push(self.group_keys[i].clone());
        }
        Self::from_flat(
            features,
            self.n_features,
            labels,
            groups,
            self.feature_names.clone(),
        )
    }

    pub(crate) fn with_features(&self, features: Vec<f64>) -> Self {
        debug_assert_eq!(features.len(), self.features.len());
        Self {
            features,
            ..self.clone()
        }
    }
}
