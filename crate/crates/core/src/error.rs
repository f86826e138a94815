use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, AuditError>;

#[derive(Debug, Error)]
pub enum AuditError {
    #[error("io error: {0}")]
    Io(#[from] io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    /// Canonical recording CSV could not be parsed. `line` is 1-based.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid window config: {0}")]
    WindowConfig(String),

    #[error("invalid split: {0}")]
    Split(String),

    #[error("normalizer fit on an empty training split")]
    EmptyTrainingSplit,

    /// Prediction record rejected during ingestion. `index` is 0-based.
    #[error("record {index}: {message}")]
    Record { index: usize, message: String },

    #[error("incomplete fold coverage: {0}")]
    FoldCoverage(String),

    #[error("inconsistent run counts: {0}")]
    RunCount(String),

    #[error("missing correctness cell for model '{model}' window {window}")]
    MissingCell { model: String, window: usize },

    #[error("empty input: {0}")]
    Empty(String),

    /// Two independent routes to the same quantity disagree; signals a definition bug.
    #[error("internal consistency error: {0}")]
    Consistency(String),

    #[error("probability vector needs at least 2 classes, got {0}")]
    TooFewClasses(usize),

    #[error("missing fused distribution for IFC window {0}")]
    MissingFused(usize),

    #[error("invalid scenario: {0}")]
    Scenario(String),

    #[error("class {0} absent from training split")]
    ClassAbsent(usize),

    #[error("schema mismatch: {0}")]
    Schema(String),
}

impl AuditError {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        AuditError::Parse {
            line,
            message: message.into(),
        }
    }

    pub(crate) fn record(index: usize, message: impl Into<String>) -> Self {
        AuditError::Record {
            index,
            message: message.into(),
        }
    }
}
