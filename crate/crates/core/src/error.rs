use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by estimation, profiling and planning.
#[derive(Debug, Error)]
pub enum Error {
    #[error("too few points: need at least {needed}, got {got}")]
    TooFewPoints { needed: usize, got: usize },

    #[error("non-finite coordinate at point {point}, dimension {dim}")]
    NonFiniteInput { point: usize, dim: usize },

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("invalid ratio {value} at position {index}: ratios must be finite and >= 1")]
    InvalidRatio { index: usize, value: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("shape mismatch: plan has {ranks} ranks but model has {blocks} blocks")]
    ShapeMismatch { ranks: usize, blocks: usize },

    #[error("block {block} received rank 0; use an offset of at least 1")]
    ZeroRank { block: usize },

    #[error("layer {layer}: {source}")]
    Layer {
        layer: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable code for diagnostics.
    pub fn code(&self) -> &'static str {
        match self {
            Error::TooFewPoints { .. } => "TooFewPoints",
            Error::NonFiniteInput { .. } => "NonFiniteInput",
            Error::DegenerateInput(_) => "DegenerateInput",
            Error::InvalidRatio { .. } => "InvalidRatio",
            Error::InvalidArgument(_) => "InvalidArgument",
            Error::InvalidSpec(_) => "InvalidSpec",
            Error::Format(_) => "FormatError",
            Error::DimensionMismatch(_) => "DimensionMismatch",
            Error::LengthMismatch { .. } => "LengthMismatch",
            Error::ShapeMismatch { .. } => "ShapeMismatch",
            Error::ZeroRank { .. } => "ZeroRank",
            Error::Layer { source, .. } => source.code(),
            Error::Io { .. } => "IoError",
            Error::Csv(_) => "CsvError",
            Error::Json(_) => "JsonError",
        }
    }

    /// Strips any layer tag, returning the underlying error.
    pub fn root(&self) -> &Error {
        match self {
            Error::Layer { source, .. } => source.root(),
            other => other,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
