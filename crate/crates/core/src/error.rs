use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration at `{field}`: {reason}")]
    InvalidConfig { field: String, reason: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("no consensus: best model has {found} inliers, {required} required")]
    NoConsensus { found: usize, required: usize },

    #[error("degenerate data: {0}")]
    Degenerate(&'static str),

    #[error("projection singularity: {0}")]
    Singular(&'static str),

    #[error("non-finite residuals at the initial guess")]
    NonFinite,

    #[error("overspeed: {speed:.3} m/s exceeds v_max {limit:.3} m/s (use --force)")]
    Overspeed { speed: f64, limit: f64 },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("frame count mismatch: trajectory has {trajectory} frames, truth has {truth}")]
    Misaligned { trajectory: usize, truth: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidConfig {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
