use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("basis degree {degree} exceeds the supported maximum of {max}")]
    DegreeTooHigh { degree: usize, max: usize },

    #[error("moment Gram matrix is numerically singular at basis index {index}")]
    SingularGram { index: usize },

    #[error(
        "rational realization check failed: convolution term {index} is {residual:e}, expected 0"
    )]
    NotRational { index: usize, residual: f64 },

    #[error("no closed-form optimal delay for {0}")]
    NoOptimalDelay(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("malformed input: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
