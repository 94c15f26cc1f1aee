use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("no ground points left after the overhead filter")]
    NoGroundPoints,

    #[error("degenerate neighborhood: {points} points, {reason}")]
    DegenerateNeighborhood { points: usize, reason: &'static str },

    #[error("too few samples: need {needed}, have {available}")]
    TooFewSamples { needed: usize, available: usize },

    #[error("constant signal: standard deviation {0:e} is below 1e-6")]
    ConstantSignal(f64),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("frequency vector does not match the checkpoint")]
    FrequencyMismatch,

    #[error("non-finite activation in {0}")]
    NonFinite(&'static str),

    #[error("training diverged at step {step} (loss = {loss})")]
    Diverged { step: usize, loss: f64 },

    #[error("no valid patches could be extracted")]
    EmptyDataset,

    #[error("pose ({x:.2}, {y:.2}) lies outside the world")]
    OutsideWorld { x: f64, y: f64 },

    #[error("no path between start and goal")]
    NoPath,

    #[error("{0}")]
    Undefined(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_))
    }
}
