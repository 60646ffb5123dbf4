//! Dataset generation, training, evaluation and file formats for
//! camera-aided RIS beam selection, built on [`risbeam_core`].

pub mod config;
pub mod fft;
pub mod formats;
pub mod pipeline;

use std::path::{Path, PathBuf};

pub use config::RunConfig;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid config: {0}")]
    Config(String),
    #[error("{path}:{line}: {msg}")]
    Format { path: PathBuf, line: usize, msg: String },
    #[error("incompatible inputs: {0}")]
    Mismatch(String),
    #[error(transparent)]
    Core(#[from] risbeam_core::Error),
}

impl Error {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub(crate) fn format(path: &Path, line: usize, msg: impl Into<String>) -> Self {
        Error::Format {
            path: path.to_path_buf(),
            line,
            msg: msg.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
