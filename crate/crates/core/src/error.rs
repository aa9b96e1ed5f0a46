use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },
    #[error("probability {0} is outside [0, 1]")]
    Probability(f64),
    #[error("duplicate edge {src} -> {dst}")]
    DuplicateEdge { src: String, dst: String },
    #[error("self-loop on node {0}")]
    SelfLoop(String),
    #[error("edge list has no probability column and no default probability was given")]
    MissingProbability,
    #[error("node id {id} is out of range for a graph with {node_count} nodes")]
    NodeOutOfRange { id: usize, node_count: usize },
    #[error("horizon of {horizon} rounds is exhausted")]
    HorizonExhausted { horizon: u64 },
    #[error("{needed} plays requested but only {remaining} rounds remain")]
    InsufficientRounds { needed: u64, remaining: u64 },
    #[error("budget k = {k} is invalid for a graph with {n} nodes")]
    Budget { k: usize, n: usize },
    #[error("horizon must be at least 2, got {0}")]
    Horizon(u64),
    #[error("{what} exceeds the exact-evaluation limit ({value} > {limit})")]
    TooLarge {
        what: &'static str,
        value: u128,
        limit: u128,
    },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by the caller's parameters rather than by the
    /// environment (used by the CLI to pick an exit status).
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::Budget { .. } | Error::Horizon(_) | Error::Config(_) | Error::Probability(_)
        )
    }
}
