//! Crate-wide error type.

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument fell outside its documented domain.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A policy failed a structural constraint (bad parameters, non-finite
    /// or negative order decision).
    #[error("invalid policy: {0}")]
    Policy(String),

    /// Workspace directory or schema problem.
    #[error("workspace: {0}")]
    Workspace(String),

    /// Engine or harness configuration problem.
    #[error("config: {0}")]
    Config(String),

    /// Per-epoch evaluation budget would be exceeded.
    #[error("evaluation budget exceeded: {0}")]
    Budget(String),

    /// External proposal endpoint failed or returned garbage.
    #[error("proposal source: {0}")]
    Proposal(String),

    /// A numerical guarantee check was violated.
    #[error("guarantee violated: {0}")]
    Guarantee(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json { path: path.into(), source }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
