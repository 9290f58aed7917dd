use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    /// Reducible or periodic chain: the mixing assumptions fail.
    #[error("chain is not ergodic: {0}")]
    NotErgodic(String),

    #[error("index {index} exceeds the sampling horizon cap {cap}")]
    HorizonOverflow { index: u64, cap: u64 },

    #[error("exact alpha-mixing needs S <= {max} states, model has {states}")]
    StateSpaceTooLarge { states: usize, max: usize },

    #[error("schedule value q_{i}({n}) exceeds 2^62")]
    Overflow { i: usize, n: u64 },

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error("invalid observable: {0}")]
    InvalidObservable(String),

    #[error("grid of {entries} entries exceeds the cap of {cap}")]
    GridTooLarge { entries: u128, cap: u128 },

    #[error("truncation failed: tail bound {bound:.3e} above tolerance {tol:.3e} at max lag {max_lag}")]
    TruncationFailed { bound: f64, tol: f64, max_lag: u64 },

    #[error("quadrature failed: {0}")]
    QuadratureFailed(String),

    #[error("invalid experiment: {0}")]
    InvalidExperiment(String),

    #[error("fingerprint mismatch: expected {expected}, found {found}")]
    FingerprintMismatch { expected: String, found: String },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("parse error in {location}: {message}")]
    Parse { location: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
