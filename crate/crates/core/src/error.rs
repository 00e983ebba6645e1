use std::path::PathBuf;

use thiserror::Error;

/// Broad classes of failure, used by front-ends to choose exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Data,
    Backend,
}

#[derive(Debug, Error)]
pub enum UdlError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("missing vectors for {} id(s): {}", .0.len(), preview(.0))]
    Coverage(Vec<String>),

    #[error("backend error: {0}")]
    Transport(String),

    #[error("translation failed for document {id}: {message}")]
    Translation { id: String, message: String },
}

fn preview(ids: &[String]) -> String {
    const SHOWN: usize = 10;
    let mut s = ids.iter().take(SHOWN).cloned().collect::<Vec<_>>().join(", ");
    if ids.len() > SHOWN {
        s.push_str(&format!(", ... ({} more)", ids.len() - SHOWN));
    }
    s
}

impl UdlError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        UdlError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        UdlError::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        UdlError::Format {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            UdlError::Config(_) => ErrorClass::Config,
            UdlError::Transport(_) | UdlError::Translation { .. } => ErrorClass::Backend,
            // A missing input file is a data problem, not a configuration one.
            UdlError::Io { .. }
            | UdlError::Parse { .. }
            | UdlError::Format { .. }
            | UdlError::Validation(_)
            | UdlError::Argument(_)
            | UdlError::Coverage(_) => ErrorClass::Data,
        }
    }
}

pub type Result<T, E = UdlError> = std::result::Result<T, E>;
