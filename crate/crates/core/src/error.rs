use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at {path}:{line}: {message}")]
    Parse {
        path: String,
        line: u64,
        message: String,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("simulation infeasible at epoch {epoch}, step {step}: need {need}, have {available}")]
    Infeasible {
        epoch: u32,
        step: &'static str,
        need: usize,
        available: usize,
    },

    #[error("training error: {0}")]
    Train(String),

    #[error("undefined metric: {0}")]
    Metric(String),

    #[error("coverage target {target} unreachable by the {curve} curve")]
    CoverageUnreachable { curve: &'static str, target: f64 },

    #[error("missing artifact: {0} (run the producing subcommand first)")]
    MissingArtifact(PathBuf),
}

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
