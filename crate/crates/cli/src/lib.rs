//! File formats, HTTP model clients and the `procgraph` command line on top
//! of `procgraph-core`.

use std::path::Path;

use thiserror::Error;

pub mod cli;
pub mod fixtures;
pub mod http;
pub mod io;
pub mod pipeline;
pub mod split;
pub mod templates;

pub use procgraph_core as core;

/// Process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Ok = 0,
    Failed = 1,
    Usage = 2,
    Unavailable = 3,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("json: {0}")]
    Json(String),
    #[error("{0}")]
    Unavailable(String),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    pub fn exit(&self) -> Exit {
        match self {
            CliError::Usage(_) => Exit::Usage,
            CliError::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound => Exit::Usage,
            CliError::Io { .. } | CliError::Json(_) => Exit::Failed,
            CliError::Unavailable(_) => Exit::Unavailable,
        }
    }
}
