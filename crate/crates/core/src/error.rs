use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the simulator or the perception pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid camera model: {0}")]
    InvalidCamera(String),

    #[error("point is behind the camera (z = {0} mm)")]
    BehindCamera(f64),

    #[error("depth must be positive, got {0} mm")]
    NonPositiveDepth(f64),

    #[error("invalid frame: {0}")]
    InvalidFrame(String),

    #[error("frame synchronization mismatch: {0}")]
    Unsynchronized(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid scenario script: {0}")]
    Script(String),

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("ambiguous dot assignment: grid id {dot_id} is nearest to blobs {first} and {second}")]
    AmbiguousAssignment {
        dot_id: usize,
        first: usize,
        second: usize,
    },

    #[error("contact baseline has not been established")]
    MissingBaseline,

    #[error("no object found in depth frame")]
    NoObject,

    #[error("need at least {needed} rows, got {got}")]
    TooFewRows { needed: usize, got: usize },

    #[error("malformed file {path}: {reason}")]
    Malformed { path: PathBuf, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
