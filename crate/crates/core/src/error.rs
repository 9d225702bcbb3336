use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("wrong engine: {0}")]
    WrongEngine(String),

    #[error("resource limit exceeded: {what} (estimate {estimate:.3e}, limit {limit:.3e})")]
    ResourceLimit {
        what: String,
        estimate: f64,
        limit: f64,
    },

    #[error("not found: {what} (searched up to t = {searched_to})")]
    NotFound { what: String, searched_to: f64 },

    #[error("config syntax error at line {line}, column {column}: {message}")]
    ConfigSyntax {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("config error in `{key}`: {message}")]
    ConfigSemantic { key: String, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("self-test failed: {0}")]
    SelfTest(String),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::ConfigSemantic {
            key: key.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable tag used in JSON diagnostics.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidParameter(_) => "invalid-parameter",
            Error::WrongEngine(_) => "wrong-engine",
            Error::ResourceLimit { .. } => "resource-limit",
            Error::NotFound { .. } => "not-found",
            Error::ConfigSyntax { .. } => "config-syntax",
            Error::ConfigSemantic { .. } => "config-semantic",
            Error::Io { .. } => "io",
            Error::SelfTest(_) => "self-test",
        }
    }

    /// Process exit status for the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidParameter(_)
            | Error::WrongEngine(_)
            | Error::ConfigSyntax { .. }
            | Error::ConfigSemantic { .. } => 2,
            Error::ResourceLimit { .. } => 3,
            Error::NotFound { .. } => 4,
            Error::Io { .. } | Error::SelfTest(_) => 1,
        }
    }
}
