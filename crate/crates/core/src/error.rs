use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the laboratory.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("tier D utterance {0} reached a training batch")]
    TierDInTraining(String),

    #[error("training diverged at stage {stage}, step {step} (loss {loss})")]
    Divergence { stage: usize, step: usize, loss: f64 },

    #[error("word error rate undefined: reference pool is empty")]
    UndefinedWer,

    #[error("malformed {what}: {detail}")]
    Format { what: &'static str, detail: String },

    #[error("checkpoint truncated: {0}")]
    Truncated(String),

    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },

    #[error("unsupported format version {found} (expected {expected})")]
    VersionMismatch { expected: u32, found: u32 },

    #[error("{what} hash mismatch: expected {expected:016x}, found {found:016x}")]
    HashMismatch { what: &'static str, expected: u64, found: u64 },

    #[error("missing file {0}")]
    MissingFile(PathBuf),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable identifier, used by the CLI error line.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Config(_) => "config",
            Error::Shape(_) => "shape",
            Error::NonFinite(_) => "non_finite",
            Error::Degenerate(_) => "degenerate",
            Error::TierDInTraining(_) => "tier_d_in_training",
            Error::Divergence { .. } => "divergence",
            Error::UndefinedWer => "undefined_wer",
            Error::Format { .. } => "format",
            Error::Truncated(_) => "truncated",
            Error::BadMagic { .. } => "bad_magic",
            Error::VersionMismatch { .. } => "version_mismatch",
            Error::HashMismatch { .. } => "hash_mismatch",
            Error::MissingFile(_) => "missing_file",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
