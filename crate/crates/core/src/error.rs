use std::path::PathBuf;

use crate::events::ObservationId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: line {line}: {msg}")]
    Parse {
        path: PathBuf,
        line: u64,
        msg: String,
    },

    #[error("duplicate observation id {0}")]
    DuplicateId(ObservationId),

    #[error("observation {id} has state dimension {got}, expected {expected}")]
    DimensionMismatch {
        id: ObservationId,
        expected: usize,
        got: usize,
    },

    #[error("vector of length {got} given to a density of dimension {expected}")]
    DensityDimension { expected: usize, got: usize },

    #[error("invalid gaussian mixture: {0}")]
    InvalidGmm(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("time gap {gap} outside (0, {tau_max}]")]
    GapOutOfRange { gap: f64, tau_max: f64 },

    #[error("transition {from} -> {to} has zero likelihood")]
    ImpossibleTransition {
        from: ObservationId,
        to: ObservationId,
    },

    #[error("empty cluster")]
    EmptyCluster,

    #[error("invalid clustering: {0}")]
    InvalidClustering(String),

    #[error("infeasible flow: {0}")]
    InfeasibleFlow(String),

    #[error("brute force limited to {max} observations, got {got}")]
    TooManyObservations { max: usize, got: usize },

    #[error("observation id sets differ: {0}")]
    IdMismatch(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
