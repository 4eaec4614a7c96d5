use std::io;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid intersection: {field}: {reason}")]
    InvalidIntersection { field: String, reason: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("config line {line}: key `{key}`: {reason}")]
    Config {
        line: usize,
        key: String,
        reason: String,
    },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("observation length {got} does not match network input width {expected}")]
    InputWidth { expected: usize, got: usize },

    #[error("vehicle {0} is outside the control zone")]
    OutsideControlZone(u64),

    #[error("replay buffer holds {len} transitions, batch needs {batch}")]
    BufferTooSmall { len: usize, batch: usize },

    #[error("run of {run_s} s is shorter than the {window_s} s validation window")]
    RunTooShort { run_s: f64, window_s: f64 },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
