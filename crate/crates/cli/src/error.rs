use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] wslab_core::Error),

    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },

    #[error("cannot read config file {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
}

pub type CliResult<T> = Result<T, CliError>;
