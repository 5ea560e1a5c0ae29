use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("unsupported group action: {0}")]
    UnsupportedAction(String),

    #[error("empty dataset: {0}")]
    EmptyDataset(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("matrix error: {0}")]
    Matrix(String),

    #[error("no invariant direction: the invariant subspace is trivial")]
    NoInvariantDirection,

    #[error("degenerate dataset: {0}")]
    DegenerateDataset(String),

    #[error("training diverged at epoch {epoch}: non-finite loss")]
    Divergence { epoch: usize },

    #[error("empty point cloud after masking")]
    EmptyCloud,

    #[error("domain error: {0}")]
    Domain(String),

    #[error("regime error: {0}")]
    Regime(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("affine relation violated: m1* = {m1}, m2* = {m2}, 2*m1* - 1 - m2* = {gap:e}")]
    AffineRelation { m1: f64, m2: f64, gap: f64 },

    #[error("distance failed in {kind} round {round}: {source}")]
    Round {
        kind: &'static str,
        round: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures caused by numerics rather than bad input.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::Divergence { .. } | Error::Matrix(_) => true,
            Error::Round { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
