//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("newick parse error at byte {position}: {message}")]
    NewickParse { position: usize, message: String },

    #[error("invalid tree: {0}")]
    InvalidTree(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("singular tree covariance (degenerate tree)")]
    SingularTreeCovariance,

    #[error("graph is not decomposable")]
    NotDecomposable,

    #[error("G-Wishart sampler failed to produce a valid draw: {0}")]
    SamplerFailure(String),

    #[error("trait labels do not match tree tips: {0}")]
    LabelMismatch(String),

    #[error("empty trace")]
    EmptyTrace,

    #[error(
        "no stored sample consistent with the graph estimate for entries {entries:?}; \
         run a longer chain or inspect edge inclusion probabilities near the threshold"
    )]
    InconsistentEstimate { entries: Vec<(usize, usize)> },

    #[error("insufficient samples: need at least {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("all replicates failed")]
    AllReplicatesFailed,

    #[error("replicate failure rate {failed}/{total} exceeds tolerance")]
    TooManyFailedReplicates { failed: usize, total: usize },

    #[error("trace format error: {0}")]
    TraceFormat(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
