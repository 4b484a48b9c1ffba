use thiserror::Error;

#[derive(Debug, Error)]
pub enum G2pError {
    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    Shape {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    #[error("index {index} out of range for size {size}")]
    IndexOutOfRange { index: usize, size: usize },
    #[error("non-finite value produced by {0}")]
    NonFinite(String),
    #[error("empty source")]
    EmptySource,
    #[error("empty target")]
    EmptyTarget,
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("loss must be a scalar, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),
    #[error("unknown token `{0}`")]
    UnknownToken(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("malformed {what}: {detail}")]
    Format { what: &'static str, detail: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, G2pError>;
