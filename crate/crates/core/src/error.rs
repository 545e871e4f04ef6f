use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("nonlinearity failed its audit: {0}")]
    NonlinearityAudit(String),

    #[error("inadmissible inequality parameters: {0}")]
    Inadmissible(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("solver did not converge after {iterations} iterations (residual {residual:.3e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("mountain-pass path collapsed onto an endpoint after {restarts} restarts")]
    PathCollapse { restarts: usize },

    #[error("field file {path}: {reason}")]
    FieldFile { path: PathBuf, reason: String },

    #[error("config line {line}: {reason}")]
    Config { line: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
