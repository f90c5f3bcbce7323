use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("input file not found: {}", .0.display())]
    MissingFile(PathBuf),

    #[error("malformed header in {path}: missing column `{column}`")]
    MalformedHeader { path: String, column: String },

    #[error("row {row}: {message}")]
    BadRow { row: usize, message: String },

    #[error("empty roster")]
    EmptyRoster,

    #[error("decay requested for a match dated after the snapshot ({match_date} > {snapshot_date})")]
    FutureMatch {
        match_date: chrono::NaiveDate,
        snapshot_date: chrono::NaiveDate,
    },

    #[error("unsupported best-of format: {0}")]
    BestOf(u8),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("no training samples")]
    NoTrainingSamples,

    #[error("empty history at the first prediction snapshot")]
    EmptyHistory,

    #[error("empty subset")]
    EmptySubset,

    #[error("need at least {needed} items, got {got}")]
    TooFew { needed: usize, got: usize },

    #[error("all inputs tied")]
    AllTied,

    #[error("hodge decomposition needs at least two nodes")]
    TooSmall,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
