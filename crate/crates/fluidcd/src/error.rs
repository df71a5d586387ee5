use std::path::PathBuf;
use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at line {row}, column {col}: {reason}")]
    Parse {
        row: usize,
        col: usize,
        reason: String,
    },

    #[error("dataset too small: {actual} samples, need at least {required}")]
    TooFewSamples { actual: usize, required: usize },

    #[error("invalid parameter {name}: {reason}")]
    Param { name: &'static str, reason: String },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("matrix {name} is not positive definite (pivot {pivot:e} at index {index})")]
    NotPositiveDefinite {
        name: &'static str,
        index: usize,
        pivot: f64,
    },

    #[error("sample {sample}: all features are masked")]
    DegenerateSample { sample: usize },

    #[error("degenerate graph: node {node} has zero degree")]
    ZeroDegree { node: usize },

    #[error("degenerate partition: cluster {cluster} has zero volume")]
    ZeroVolume { cluster: usize },

    #[error("degenerate weights: all node weights are zero")]
    ZeroWeights,

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("stage {stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Wraps an error with the pipeline stage it surfaced from.
    pub fn in_stage(self, stage: &'static str) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Error {
        Error::Param {
            name,
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
