use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the sensing library and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: String, found: String },

    #[error("elevation {theta} rad is outside the front half-space; the element gain is zero")]
    OutsideFrontHalfSpace { theta: f64 },

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("eigendecomposition failed: {0}")]
    Eigen(String),

    #[error("polynomial rooting failed: {0}")]
    Rooting(String),

    #[error("{failures} of {trials} trials failed at {sweep} = {value}")]
    TooManyFailures {
        sweep: String,
        value: f64,
        failures: usize,
        trials: usize,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
