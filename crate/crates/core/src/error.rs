use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Input data or parameters violate a documented invariant.
    #[error("validation error: {0}")]
    Validation(String),

    #[error("manifest error in `{entry}`: {message}")]
    Manifest { entry: String, message: String },

    #[error("format error in {}: {message}", path.display())]
    Format { path: PathBuf, message: String },

    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Any of the above, attributed to a manifest entry.
    #[error("entry `{entry}`: {source}")]
    Entry {
        entry: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }

    pub(crate) fn in_entry(self, entry: &str) -> Self {
        Error::Entry {
            entry: entry.to_string(),
            source: Box::new(self),
        }
    }

    /// Process exit code used by the command-line tool.
    ///
    /// 1 for validation problems (bad data, manifests, malformed files),
    /// 2 for I/O failures and 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Validation(_) | Error::Manifest { .. } | Error::Format { .. } => 1,
            Error::Io { .. } => 2,
            Error::Numerical(_) => 3,
            Error::Entry { source, .. } => source.exit_code(),
        }
    }
}
