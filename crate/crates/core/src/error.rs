//! Error type shared across the pipeline.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration or argument values.
    #[error("config error: {0}")]
    Config(String),

    /// Problems with input data: audio files, manifests, shapes.
    #[error("data error: {0}")]
    Data(String),

    /// Shape or metadata mismatch between operands.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// Non-finite value encountered where the pipeline requires finite math.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// Checkpoint / container format problems (bad magic, version, truncation).
    #[error("format error: {0}")]
    Format(String),

    /// Unknown speaker id looked up in the speaker table.
    #[error("unknown speaker id: {0}")]
    UnknownSpeaker(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("wav error: {0}")]
    Wav(#[from] hound::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable process exit code for the CLI contract:
    /// 1 usage/config, 2 data, 3 numeric abort.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::UnknownSpeaker(_) => 1,
            Error::Numeric(_) => 3,
            _ => 2,
        }
    }
}
