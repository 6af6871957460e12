use std::path::PathBuf;

use thiserror::Error;

/// Everything that can go wrong while building datasets, fitting or running experiments.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate design: {0}")]
    DegenerateDesign(String),

    #[error("too few samples: need at least {needed}, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("every sample is censored; the censored-only likelihood has no interior maximum")]
    AllCensored,

    #[error("negative log-likelihood is not finite at the starting point ({0})")]
    NonFinite(String),

    #[error("objective returned a non-finite value at the initial point")]
    NonFiniteObjective,

    #[error("information matrix is numerically singular (condition estimate {condition:.3e})")]
    SingularInformation { condition: f64 },

    #[error("{path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("no censoring level: supply `c` in the file header or as an override")]
    MissingCensorLevel,

    #[error("missing metadata key `{0}`")]
    MissingKey(&'static str),

    #[error("{path}: line {line}: {message}")]
    Invariant {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("invalid experiment spec: {0}")]
    Spec(String),

    #[error("all {0} replicates failed to produce a fit")]
    AllReplicatesFailed(usize),

    #[error("failed to write {path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("failed to read {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
