//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by any segverify operation.
#[derive(Debug, Error)]
pub enum Error {
    /// Operands have incompatible shapes.
    #[error("shape mismatch: {0}")]
    Shape(String),
    /// A parameter is out of its valid range.
    #[error("invalid parameter: {0}")]
    Param(String),
    /// Patch dimensions do not tile the image, or a patch list is inconsistent.
    #[error("tiling error: {0}")]
    Tiling(String),
    /// An operation requires a nonempty mask.
    #[error("empty mask: {0}")]
    EmptyMask(String),
    /// A model is unusable (untrained, non-finite parameters, wrong kind).
    #[error("model error: {0}")]
    Model(String),
    /// Training diverged or was given an unusable dataset.
    #[error("training error: {0}")]
    Training(String),
    /// Threshold calibration cannot proceed on the given validation set.
    #[error("calibration error: {0}")]
    Calibration(String),
    /// Synthetic scene generation could not satisfy its geometry constraints.
    #[error("generation error: {0}")]
    Gen(String),
    /// Mask corruption could not reach the requested overlap target.
    #[error("corruption error: {0}")]
    Corruption(String),
    /// Malformed file contents (PGM, checkpoint manifest, dataset index).
    #[error("format error: {0}")]
    Format(String),
    /// Underlying I/O failure.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable machine-readable category tag for this error.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Shape(_) => "shape",
            Error::Param(_) => "param",
            Error::Tiling(_) => "tiling",
            Error::EmptyMask(_) => "empty_mask",
            Error::Model(_) => "model",
            Error::Training(_) => "training",
            Error::Calibration(_) => "calibration",
            Error::Gen(_) => "gen",
            Error::Corruption(_) => "corruption",
            Error::Format(_) => "format",
            Error::Io(_) => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
