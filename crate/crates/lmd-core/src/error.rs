use thiserror::Error;

/// Crate-wide error type.
///
/// Everything except `Io` is a data-contract violation: the inputs broke a
/// documented precondition or a file was malformed.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {context}: expected {expected}, got {got}")]
    ShapeMismatch { context: String, expected: String, got: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("input size contract violated: {0}")]
    InputContract(String),

    #[error("corrupted pool indices: offset {offset} is outside the 2x2 window of output cell ({y}, {x})")]
    CorruptIndices { offset: usize, y: usize, x: usize },

    #[error("label {label} out of range for {num_classes} classes at ({y}, {x})")]
    LabelOutOfRange { label: u8, num_classes: usize, y: usize, x: usize },

    #[error("weight store entry '{layer}' invalid: {reason}")]
    BadWeights { layer: String, reason: String },

    #[error("bad magic: not an LMDW weight file")]
    BadMagic,

    #[error("unsupported weight file version {0} (expected 1)")]
    VersionMismatch(u32),

    #[error("truncated weight file while reading {0}")]
    Truncated(String),

    #[error("netpbm parse error: {0}")]
    Netpbm(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn shape(
        context: impl Into<String>,
        expected: impl Into<String>,
        got: impl Into<String>,
    ) -> Error {
        Error::ShapeMismatch { context: context.into(), expected: expected.into(), got: got.into() }
    }
}
