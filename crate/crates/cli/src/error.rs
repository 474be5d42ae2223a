use std::path::PathBuf;

use thiserror::Error;

#[derive(Error, Debug)]
pub enum CliError {
    #[error(transparent)]
    Lib(#[from] ectensor::Error),

    #[error("{0}")]
    Usage(String),

    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl CliError {
    /// 3 for numerical failures, 2 for everything caused by the input.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Lib(e) if e.is_numerical() => 3,
            _ => 2,
        }
    }

    /// Attaches the offending path to a library error.
    pub fn at(path: &std::path::Path, e: ectensor::Error) -> Self {
        match e {
            ectensor::Error::Io(source) => CliError::Io { path: path.to_path_buf(), source },
            ectensor::Error::Json(source) => CliError::Json { path: path.to_path_buf(), source },
            ectensor::Error::Format(msg) => CliError::Usage(format!("{}: malformed tensor file: {msg}", path.display())),
            other => CliError::Lib(other),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

pub fn usage<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(CliError::Usage(msg.into()))
}
