//! Pipeline library behind the `decov` command line: file formats, stage
//! configurations, and the multi-seed experiment harness gluing together the
//! design, sampling, recovery, and structure-estimation layers of
//! [`decov_core`].
//!
//! The binary is a thin dispatcher; everything it does is reachable through
//! this library so experiments can also be driven programmatically (the
//! integration tests do exactly that).

use std::path::PathBuf;

use thiserror::Error;

pub mod config;
pub mod experiment;
pub mod io;
pub mod pipeline;

/// Errors surfaced by the pipeline layers.
#[derive(Debug, Error)]
pub enum CliError {
    /// Filesystem failure, annotated with the path involved.
    #[error("{path}: {source}")]
    Io {
        /// File or directory the operation touched.
        path: PathBuf,
        /// Underlying error.
        source: std::io::Error,
    },
    /// A text-format file did not parse.
    #[error("{path}:{line}: {message}")]
    Parse {
        /// Offending file.
        path: PathBuf,
        /// 1-based line number.
        line: usize,
        /// What went wrong.
        message: String,
    },
    /// A JSON file did not deserialize (or a value failed to serialize).
    #[error("{path}: {source}")]
    Json {
        /// Offending file.
        path: PathBuf,
        /// Underlying serde error.
        source: serde_json::Error,
    },
    /// Invalid or inconsistent configuration.
    #[error("invalid configuration: {0}")]
    Config(String),
    /// Failure bubbled up from the numerical core.
    #[error(transparent)]
    Core(#[from] decov_core::Error),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, CliError>;

impl CliError {
    /// Wraps an IO error with its path.
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }
}
