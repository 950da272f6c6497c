use std::path::PathBuf;

use crate::neighbourhood::GenerationStats;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("missing file: {0}")]
    MissingFile(PathBuf),

    #[error("empty dataset")]
    EmptyDataset,

    #[error("row {row}, column '{column}': cannot parse '{value}' as a number")]
    NonNumeric {
        row: usize,
        column: String,
        value: String,
    },

    #[error("row {row}: label '{value}' is not 0 or 1")]
    BadLabel { row: usize, value: String },

    #[error("duplicate column name '{0}'")]
    DuplicateColumn(String),

    #[error("column '{0}' not found in header")]
    MissingColumn(String),

    #[error("row {row}: expected {expected} fields, found {found}")]
    RaggedRow {
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("feature '{0}' is constant over the fitting rows")]
    ConstantFeature(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("need at least {needed} groups for the split, found {found}")]
    TooFewGroups { needed: usize, found: usize },

    #[error("{0}")]
    SingleClass(&'static str),

    #[error("need at least {needed} rows, found {found}")]
    TooFewRows { needed: usize, found: usize },

    #[error("model file version mismatch: expected {expected}, found {found}")]
    VersionMismatch { expected: u32, found: u32 },

    #[error("corrupt file {path}: {reason}")]
    Corrupt { path: PathBuf, reason: String },

    #[error("medoid {0} has no neighbouring medoids")]
    EmptyNeighbourList(usize),

    #[error("unstable point: no same-class perturbation kept ({0})")]
    UnstablePoint(GenerationStats),

    #[error("unknown method tag '{0}'")]
    UnknownMethod(String),

    #[error("ensemble has no members")]
    EmptyEnsemble,

    #[error("all ensemble members are zero vectors")]
    AllZeroEnsemble,

    #[error("neighbourhood has no members")]
    EmptyNeighbourhood,

    #[error("negative distance {0}")]
    NegativeDistance(f64),

    #[error("no points to evaluate")]
    NoPointsToEvaluate,
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        if source.kind() == std::io::ErrorKind::NotFound {
            Error::MissingFile(path.into())
        } else {
            Error::Io {
                path: path.into(),
                source,
            }
        }
    }

    /// Errors caused by the input data rather than by a failing stage.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::Csv(_)
                | Error::MissingFile(_)
                | Error::EmptyDataset
                | Error::NonNumeric { .. }
                | Error::BadLabel { .. }
                | Error::DuplicateColumn(_)
                | Error::MissingColumn(_)
                | Error::RaggedRow { .. }
                | Error::ConstantFeature(_)
                | Error::TooFewGroups { .. }
                | Error::SingleClass(_)
                | Error::TooFewRows { .. }
                | Error::NoPointsToEvaluate
        )
    }
}

pub(crate) fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

pub(crate) fn check_finite(values: &[f64], what: &'static str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}
