use thiserror::Error;

/// Errors surfaced by the core library.
#[derive(Debug, Error)]
pub enum Error {
    /// A tensor or layer received incompatible shapes.
    #[error("shape error in {context}: {detail}")]
    Shape { context: &'static str, detail: String },

    /// An argument outside its documented range (alpha, k, stride, ...).
    #[error("invalid argument: {0}")]
    InvalidArg(String),

    /// Dataset could not be loaded or is unusable.
    #[error("dataset error: {0}")]
    Dataset(String),

    /// Checkpoint file has an unsupported format version.
    #[error("checkpoint version mismatch: found {found}, expected {expected}")]
    CheckpointVersion { found: u32, expected: u32 },

    /// Checkpoint file is truncated or fails its checksum.
    #[error("checkpoint integrity: {0}")]
    CheckpointIntegrity(String),

    /// Checkpoint architecture descriptor does not match what was requested
    /// or does not match the stored tensors.
    #[error("checkpoint architecture mismatch: {0}")]
    CheckpointArch(String),

    /// Training produced a non-finite loss.
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("image error: {0}")]
    Image(#[from] image::ImageError),
}

impl Error {
    pub fn shape(context: &'static str, detail: impl Into<String>) -> Self {
        Error::Shape {
            context,
            detail: detail.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
