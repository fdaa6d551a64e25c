use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },

    #[error("utterance too short: {frames} frames, need more than {needed}")]
    UtteranceTooShort { frames: usize, needed: usize },

    #[error("non-finite gradient in parameter `{0}`")]
    NonFiniteGradient(String),

    #[error("configuration mismatch: {0}")]
    ConfigMismatch(String),

    #[error("bad configuration: {0}")]
    BadConfig(String),

    #[error("insufficient pool: {} categories short (worst deficit {worst})", deficits.iter().filter(|d| **d > 0).count())]
    InsufficientPool { deficits: Vec<u64>, worst: u64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("unbalanced word types: {0}")]
    UnbalancedTypes(String),

    #[error("category mismatch: {0}")]
    CategoryMismatch(String),

    #[error("k = {k} outside 1..={n}")]
    BadK { k: usize, n: usize },

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("degenerate input: {0}")]
    DegenerateInput(&'static str),

    #[error("unknown layer `{0}`")]
    UnknownLayer(String),

    #[error("missing checkpoint {}", .0.display())]
    MissingCheckpoint(PathBuf),

    #[error("missing artifact {}", .0.display())]
    MissingArtifact(PathBuf),

    #[error("bad magic in {what}: expected {expected:?}")]
    BadMagic { what: &'static str, expected: &'static str },

    #[error("unsupported {what} version {version}")]
    UnsupportedVersion { what: &'static str, version: u32 },

    #[error("truncated {what}: expected {expected} bytes, found {found}")]
    Truncated { what: &'static str, expected: usize, found: usize },

    #[error("trailing bytes in {what}: {extra} unexpected bytes")]
    TrailingBytes { what: &'static str, extra: usize },

    #[error("malformed {what}: {detail}")]
    Malformed { what: &'static str, detail: String },

    #[error("output directory is locked by another run: {}", .0.display())]
    Locked(PathBuf),

    #[error("gradient check failed: max relative error {0:.3e}")]
    GradientCheck(f64),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn malformed(what: &'static str, detail: impl Into<String>) -> Self {
        Error::Malformed { what, detail: detail.into() }
    }
}
