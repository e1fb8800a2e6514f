use thiserror::Error;

/// Errors produced by the homogenization toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// A query falls outside a tabulated range or bracket.
    #[error("range error: {0}")]
    Range(String),
    /// Invalid call, configuration or precondition.
    #[error("usage error: {0}")]
    Usage(String),
    /// A coefficient or N-function failed its construction checks.
    #[error("construction error: {0}")]
    Construction(String),
    /// A nonlinear or linear solve did not converge.
    #[error("convergence error: {message} (last residual {residual:.3e})")]
    Convergence { message: String, residual: f64 },
    /// Expression mini-language parse failure.
    #[error("parse error at {pos}: {message}")]
    Parse { pos: usize, message: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("format error: {0}")]
    Format(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    pub(crate) fn convergence(message: impl Into<String>, residual: f64) -> Self {
        Error::Convergence {
            message: message.into(),
            residual,
        }
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Format(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}
