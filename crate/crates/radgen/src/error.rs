//! Crate-wide error type.
//!
//! Every fallible public operation returns [`Result`]. Domain failures carry
//! a message describing what was violated; I/O, image decoding, and JSON
//! errors are wrapped transparently.

use thiserror::Error;

/// Errors produced by corpus handling, training, inference, and evaluation.
#[derive(Debug, Error)]
pub enum Error {
    /// A normal-report template file was malformed.
    #[error("template: {0}")]
    Template(String),

    /// An annotation rule table was malformed.
    #[error("rules: {0}")]
    Rules(String),

    /// A span label outside the closed vocabulary was encountered.
    #[error("unknown span label: {0:?}")]
    UnknownLabel(String),

    /// A replacement-engine precondition was violated.
    #[error("replacement: {0}")]
    Replacement(String),

    /// A corpus or derived dataset violated a structural requirement.
    #[error("dataset: {0}")]
    Dataset(String),

    /// A model was configured or invoked inconsistently.
    #[error("model: {0}")]
    Model(String),

    /// A checkpoint directory was missing, incomplete, or corrupt.
    #[error("checkpoint: {0}")]
    Checkpoint(String),

    /// A pipeline configuration file or override was invalid.
    #[error("config: {0}")]
    Config(String),

    /// An evaluation input pair was inconsistent.
    #[error("evaluation: {0}")]
    Evaluation(String),

    /// An image could not be decoded or encoded.
    #[error(transparent)]
    Image(#[from] image::ImageError),

    /// An underlying I/O failure.
    #[error(transparent)]
    Io(#[from] std::io::Error),

    /// A JSON document could not be parsed or serialised.
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
