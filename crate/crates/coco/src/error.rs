use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid game: {0}")]
    InvalidGame(String),

    #[error("invalid stepsize schedule: {0}")]
    InvalidSchedule(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("trajectory for seed {seed} diverged at step {step}")]
    Diverged { seed: u64, step: u64 },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("analysis error: {0}")]
    Analysis(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}
