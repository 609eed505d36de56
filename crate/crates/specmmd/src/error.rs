use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("eigensolver failed to converge")]
    EigenFailure,

    #[error("size cap exceeded: {0}")]
    SizeCap(String),

    #[error("rejection sampler exceeded {0} consecutive rejections")]
    RejectionCap(u64),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: u64, msg: String },

    #[error("bad file format: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;
