use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("bit vector has length {got}, expected {expected}")]
    BitLength { expected: usize, got: usize },
    #[error("component {value} is not on the real alphabet")]
    OffAlphabet { value: f64 },
    #[error("{what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("invalid power-delay profile: {0}")]
    InvalidProfile(String),
    #[error("estimation error bound {0} outside [0, 1)")]
    ErrorBoundOutOfRange(f64),
    #[error("{fingers} Rake fingers exceed {paths} channel paths")]
    TooManyFingers { fingers: usize, paths: usize },
    #[error("exhaustive search over {bits} bits exceeds the {cap}-bit cap")]
    SearchSpaceExceeded { bits: usize, cap: usize },
    #[error("path SNRs must be pairwise distinct for the partial-fraction bound")]
    RepeatedPathSnr,
    #[error("path SNR {0} is negative")]
    NegativePathSnr(f64),
    #[error("constellation order {0} is not supported")]
    UnsupportedOrder(usize),
    #[error("target rate {0} must be positive")]
    NonPositiveRate(f64),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("no results to emit")]
    EmptyReport,
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
