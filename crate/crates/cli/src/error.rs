use std::path::PathBuf;

use affinity_core::{GraphError, IngestError, PartitionError, PlacementError};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("file not found: {}", .0.display())]
    NotFound(PathBuf),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{}: {message}", path.display())]
    Schema { path: PathBuf, message: String },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error(transparent)]
    Placement(#[from] PlacementError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::NotFound(_) => 3,
            CliError::Io { .. } => 4,
            CliError::Schema { .. } => 5,
            CliError::Config(_) => 6,
            CliError::Ingest(_) => 10,
            CliError::Graph(_) => 11,
            CliError::Partition(_) => 12,
            CliError::Placement(_) => 13,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::NotFound(_) => "file_not_found",
            CliError::Io { .. } => "io",
            CliError::Schema { .. } => "schema",
            CliError::Config(_) => "config",
            CliError::Ingest(_) => "ingest",
            CliError::Graph(_) => "graph",
            CliError::Partition(_) => "partition",
            CliError::Placement(_) => "placement",
        }
    }

    /// One-line JSON for stderr.
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Report<'a> {
            error: &'a str,
            exit_code: i32,
            message: String,
        }
        serde_json::to_string(&Report {
            error: self.kind(),
            exit_code: self.exit_code(),
            message: self.to_string(),
        })
        .expect("error report serializes")
    }
}
