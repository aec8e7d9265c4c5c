use std::path::{Path, PathBuf};

use thiserror::Error;

/// Command failure, mapped to the process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("input: {0}")]
    Input(#[source] hyperseg::Error),
    #[error("input: {0}")]
    InputMessage(String),
    #[error("cannot write {path}: {source}")]
    Output {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("pipeline: {0}")]
    Pipeline(#[source] hyperseg::Error),
}

impl CliError {
    pub const USAGE: u8 = 1;
    pub const INPUT: u8 = 2;
    pub const PIPELINE: u8 = 3;

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => Self::USAGE,
            CliError::Input(_) | CliError::InputMessage(_) | CliError::Output { .. } => Self::INPUT,
            CliError::Pipeline(_) => Self::PIPELINE,
        }
    }

    pub fn output(path: &Path, source: std::io::Error) -> Self {
        CliError::Output {
            path: path.to_path_buf(),
            source,
        }
    }

    /// Invalid parameters are usage errors; anything else is a pipeline fault.
    pub fn pipeline(err: hyperseg::Error) -> Self {
        match err {
            hyperseg::Error::InvalidParameter(msg) => CliError::Usage(msg),
            other => CliError::Pipeline(other),
        }
    }
}
