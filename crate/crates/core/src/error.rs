use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed input text. `line` is 1-based.
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("data error: {0}")]
    Data(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("unsupported model format: {0}")]
    Version(String),

    #[error("sampler error: {0}")]
    Sampler(String),

    #[error("transport error: {0}")]
    Transport(String),

    #[error("protocol error: {0}")]
    Protocol(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse { line, msg: msg.into() }
    }

    /// Prefixes the message with the pipeline stage that produced it.
    pub fn context(self, stage: &str) -> Self {
        let wrap = |m: String| format!("{stage}: {m}");
        match self {
            Error::Data(m) => Error::Data(wrap(m)),
            Error::Shape(m) => Error::Shape(wrap(m)),
            Error::Config(m) => Error::Config(wrap(m)),
            Error::Sampler(m) => Error::Sampler(wrap(m)),
            Error::Transport(m) => Error::Transport(wrap(m)),
            Error::Protocol(m) => Error::Protocol(wrap(m)),
            other => other,
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Io { .. } | Error::Parse { .. } | Error::Data(_) | Error::Shape(_) | Error::Version(_) => 3,
            Error::Sampler(_) | Error::Transport(_) | Error::Protocol(_) => 4,
        }
    }
}
