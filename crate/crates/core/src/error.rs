use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("geometry: {0}")]
    Geometry(String),

    #[error("linear solve failed{}: {message}", mode.map(|k| format!(" for mode {k}")).unwrap_or_default())]
    Solver { mode: Option<i32>, message: String },

    #[error("config field `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("report: {0}")]
    Report(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    /// Attach a Fourier mode index to a solver failure.
    pub fn with_mode(self, k: i32) -> Self {
        match self {
            Error::Solver { message, .. } => Error::Solver {
                mode: Some(k),
                message,
            },
            other => other,
        }
    }
}
