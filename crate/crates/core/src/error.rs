use std::path::PathBuf;

use thiserror::Error;

use crate::plan::PlanViolation;
use crate::platform::PlatformViolation;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{location}: {message}")]
    Parse { location: String, message: String },
    #[error("{field}: {message}")]
    Unit { field: String, message: String },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid platform: {}", join(.0))]
    InvalidPlatform(Vec<PlatformViolation>),
    #[error("invalid plan: {}", join(.0))]
    InvalidPlan(Vec<PlanViolation>),
    #[error("invalid workload: {0}")]
    InvalidWorkload(String),
    #[error("unknown environment kind `{0}` (expected local-dc, intra-continental, global-4 or global-8)")]
    UnknownEnvironment(String),
    #[error("source {source_id} has no mapper in its cluster {cluster}")]
    NoLocalMapper { source_id: String, cluster: String },
    #[error("instance too large for exhaustive search: {0}")]
    TooLarge(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("simulation: {0}")]
    Simulation(String),
    #[error("solver: {0}")]
    Solver(#[from] geomr_milp::SolveError),
}

fn join<T: std::fmt::Display>(items: &[T]) -> String {
    items
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn io_error(path: &std::path::Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}
