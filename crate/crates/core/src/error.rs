use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Caller supplied inconsistent inputs (dimension mismatch, bad option, ...).
    #[error("usage error: {0}")]
    Usage(String),
    /// A numeric argument was outside the function's domain.
    #[error("domain error: {0}")]
    Domain(String),
    #[error("training failed at epoch {epoch}: {reason}")]
    Training { epoch: usize, reason: String },
    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn parse(line: usize, reason: impl Into<String>) -> Self {
        Error::Parse {
            line,
            reason: reason.into(),
        }
    }

    /// True for errors caused by how the library was called rather than by
    /// the data or the optimizer.
    pub fn is_usage(&self) -> bool {
        matches!(self, Error::Usage(_) | Error::Parse { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
