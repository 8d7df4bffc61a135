//! File formats, command-line tools and the HTTP inference service built on
//! [`strokevid_core`].

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod dataset;
pub mod evaluate;
pub mod idx;
pub mod imageio;
pub mod metrics_log;
pub mod service;

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("format error: {0}")]
    Format(String),
    #[error(transparent)]
    Core(#[from] strokevid_core::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Error {
    let path = path.into();
    move |source| Error::Io { path, source }
}

pub(crate) fn format_err(msg: impl Into<String>) -> Error {
    Error::Format(msg.into())
}
