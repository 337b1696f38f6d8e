use std::path::{Path, PathBuf};

use thiserror::Error;

/// Everything a command can fail with. Each variant maps to a stable
/// process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Config { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Decode {
        path: PathBuf,
        #[source]
        source: stereogen::Error,
    },
    #[error("frame {index}: {source}")]
    Frame {
        index: usize,
        #[source]
        source: Box<CliError>,
    },
    #[error("unpaired-frame: {0}")]
    UnpairedFrame(usize),
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Core(#[from] stereogen::Error),
    #[error("{failed} of {total} checks failed")]
    ChecksFailed { failed: usize, total: usize },
}

impl CliError {
    pub const EXIT_CHECK_FAILURE: i32 = 1;
    pub const EXIT_INPUT_ERROR: i32 = 2;

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::ChecksFailed { .. } => Self::EXIT_CHECK_FAILURE,
            _ => Self::EXIT_INPUT_ERROR,
        }
    }

    pub(crate) fn io(path: &Path) -> impl FnOnce(std::io::Error) -> Self + '_ {
        move |source| CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub(crate) fn decode(path: &Path) -> impl FnOnce(stereogen::Error) -> Self + '_ {
        move |source| CliError::Decode {
            path: path.to_path_buf(),
            source,
        }
    }

    pub(crate) fn at_frame(index: usize) -> impl FnOnce(CliError) -> Self {
        move |source| CliError::Frame {
            index,
            source: Box::new(source),
        }
    }

    pub(crate) fn config(path: &Path, message: impl Into<String>) -> Self {
        CliError::Config {
            path: path.to_path_buf(),
            message: message.into(),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
