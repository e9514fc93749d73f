//! Experiment harness around `motorlab-core`: configuration, checkpoints,
//! CSV/JSON/SVG outputs, pairwise statistics and the multi-seed runner.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fmt;
use std::path::{Path, PathBuf};

pub mod checkpoint;
pub mod config;
pub mod experiment;
pub mod records;
pub mod report;
pub mod stats;
pub mod svg;

pub use config::{Config, Model};
pub use motorlab_core as core;

#[derive(Debug)]
pub enum Error {
    Core(motorlab_core::Error),
    Io { path: PathBuf, source: std::io::Error },
    Csv { path: PathBuf, source: csv::Error },
    Config(String),
    Checkpoint { line: usize, msg: String },
}

impl Error {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Error::Io { path: path.to_path_buf(), source }
    }

    pub fn csv(path: &Path, source: csv::Error) -> Self {
        Error::Csv { path: path.to_path_buf(), source }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Core(e) => write!(f, "{e}"),
            Error::Io { path, source } => write!(f, "{}: {source}", path.display()),
            Error::Csv { path, source } => write!(f, "{}: {source}", path.display()),
            Error::Config(msg) => write!(f, "configuration: {msg}"),
            Error::Checkpoint { line, msg } => write!(f, "checkpoint line {line}: {msg}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io { source, .. } => Some(source),
            Error::Csv { source, .. } => Some(source),
            _ => None,
        }
    }
}

impl From<motorlab_core::Error> for Error {
    fn from(e: motorlab_core::Error) -> Self {
        match e {
            motorlab_core::Error::InvalidConfig(msg) => Error::Config(msg),
            e => Error::Core(e),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Writes `contents` to `path`, creating parent directories.
pub fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}
