use thiserror::Error;

/// Errors raised across the library.
///
/// `Config` carries the offending key so the command-line front end can
/// name it; every other variant is a runtime failure.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("config error in `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("resource error: {0}")]
    Resource(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    pub fn domain(message: impl Into<String>) -> Self {
        Error::Domain(message.into())
    }

    /// Config and parse errors are user mistakes; everything else is a runtime failure.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config { .. } | Error::Parse(_) | Error::Json(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
