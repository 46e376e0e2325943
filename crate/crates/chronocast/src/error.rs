//! Error type shared across the crate.

use chrono::NaiveDate;
use std::path::PathBuf;
use thiserror::Error;

use crate::series::Scale;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: line {line}: malformed row: {reason}")]
    MalformedRow {
        path: PathBuf,
        line: u64,
        reason: String,
    },
    #[error("duplicate date {0}")]
    DuplicateDate(NaiveDate),
    #[error("gap in dates: {0} is missing (pass a linear gap-fill policy to interpolate)")]
    DateGap(NaiveDate),
    #[error("non-finite consumption {value} on {date}")]
    NonFiniteValue { date: NaiveDate, value: f64 },
    #[error("negative consumption {value} on {date}")]
    NegativeValue { date: NaiveDate, value: f64 },
    #[error("constant series: every value equals {0}, min-max scaling undefined")]
    ConstantSeries(f64),
    #[error("scale mismatch: expected a {expected} series, got {actual}")]
    ScaleMismatch { expected: Scale, actual: Scale },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("constant vector: Pearson correlation is undefined")]
    ConstantVector,
    #[error("unknown feature `{0}`")]
    UnknownFeature(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("non-positive cycle length {0}")]
    NonPositiveCycle(f64),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("backward called without a cached forward pass")]
    MissingForward,
    #[error("non-finite gradient encountered")]
    NonFiniteGradient,
    #[error("training diverged at epoch {epoch}: loss is not finite")]
    Divergence { epoch: usize },
    #[error("grid search failed: {0}")]
    GridSearch(String),
    #[error("invalid checkpoint: {0}")]
    InvalidCheckpoint(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for errors caused by bad input (files, rows, configs) as opposed
    /// to failures of a computation itself. The CLI maps the former to exit
    /// code 2 and the latter to exit code 1.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Io { .. }
                | Error::MalformedRow { .. }
                | Error::DuplicateDate(_)
                | Error::DateGap(_)
                | Error::NonFiniteValue { .. }
                | Error::NegativeValue { .. }
                | Error::ConstantSeries(_)
                | Error::UnknownFeature(_)
                | Error::InvalidConfig(_)
                | Error::InsufficientData(_)
                | Error::InvalidCheckpoint(_)
        )
    }
}
