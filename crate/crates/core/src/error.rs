use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("label mismatch: {0}")]
    Labels(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("unknown model id `{0}`")]
    UnknownModel(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by the caller's data or files rather than by
    /// the computation itself.
    pub fn is_input_error(&self) -> bool {
        !matches!(self, Error::Numerical(_))
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }
}
