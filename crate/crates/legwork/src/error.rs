//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    /// A binary file did not start with the expected magic bytes.
    #[error("{path}: not a {expected} file (bad magic)")]
    BadMagic { path: String, expected: String },

    /// A binary file declared a format version this build cannot read.
    #[error("{path}: unsupported format version {found} (supported: {supported})")]
    BadVersion { path: String, found: u32, supported: u32 },

    /// Stored checksum does not match the payload.
    #[error("{path}: checksum mismatch (stored {stored:#010x}, computed {computed:#010x})")]
    ChecksumMismatch { path: String, stored: u32, computed: u32 },

    #[error("{path}: truncated or malformed payload: {detail}")]
    Malformed { path: String, detail: String },

    /// A context window request exceeded the model's trained horizon.
    #[error("sequence of {got} steps exceeds the model horizon {max}")]
    Overlength { got: usize, max: usize },

    #[error("cannot relabel an empty segment")]
    EmptySegment,

    /// Training produced a non-finite loss; a diagnostic snapshot was written
    /// if an output directory was configured.
    #[error("non-finite {loss_name} loss at iteration {iteration}, batch {batch}")]
    NonFiniteLoss { loss_name: &'static str, iteration: usize, batch: usize },

    /// A gradient check or optimizer step found a non-finite value.
    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("{0}")]
    Invalid(String),
}
