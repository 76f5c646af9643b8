use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("invariant violated: {name}: {detail}")]
    Invariant { name: &'static str, detail: String },

    #[error("empty input: {0}")]
    Empty(String),

    #[error("singular input: {0}")]
    Singular(String),

    #[error("experiment failure: {0}")]
    Experiment(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParam(msg.into())
    }

    pub(crate) fn invariant(name: &'static str, detail: impl Into<String>) -> Self {
        Error::Invariant {
            name,
            detail: detail.into(),
        }
    }

    /// Short machine-readable code for the error kind.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Dimension(_) => "E_DIMENSION",
            Error::InvalidParam(_) => "E_PARAM",
            Error::Invariant { .. } => "E_INVARIANT",
            Error::Empty(_) => "E_EMPTY",
            Error::Singular(_) => "E_SINGULAR",
            Error::Experiment(_) => "E_EXPERIMENT",
            Error::Format(_) => "E_FORMAT",
            Error::Io(_) => "E_IO",
            Error::Csv(_) => "E_CSV",
            Error::Json(_) => "E_JSON",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
