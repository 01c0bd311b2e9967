//! File formats and batch commands on top of `dqs-core`.
//!
//! * [`config`]: TOML scenario files with unit-suffixed keys.
//! * [`output`]: CSV tables, per-trial event logs and staged output directories.
//! * [`commands`]: the `thresholds`, `analyze`, `simulate` and `sweep` jobs.

pub mod commands;
pub mod config;
pub mod output;

use std::io;
use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] dqs_core::Error),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{}: {source}", path.display())]
    Config { path: PathBuf, source: toml::de::Error },
    #[error("sweep: {0}")]
    Sweep(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, CliError>;

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(io::Error) -> CliError {
    let path = path.into();
    move |source| CliError::Io { path, source }
}
