use std::path::PathBuf;

use thiserror::Error;

/// CLI-side errors; schema problems carry the file and, when known, the
/// 1-based line they were found on.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}:{line}: {message}", path.display())]
    SchemaAtLine { path: PathBuf, line: usize, message: String },

    #[error("{}: {message}", path.display())]
    Schema { path: PathBuf, message: String },

    #[error(transparent)]
    Model(#[from] mortsched_core::Error),

    #[error("{0}")]
    Usage(String),
}

pub type Result<T> = std::result::Result<T, CliError>;
