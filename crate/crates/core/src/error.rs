use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid interval [{a}, {b}]: need finite a < b")]
    InvalidInterval { a: f64, b: f64 },
    #[error("invalid lottery: {0}")]
    InvalidLottery(String),
    #[error("operands live on different money intervals")]
    IntervalMismatch,
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("enumeration would produce {count} items, over the cap of {cap} (truncation level too fine)")]
    EnumerationCap { count: u128, cap: usize },
    #[error("invalid preference: {0}")]
    InvalidPreference(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("certainty equivalents need a strictly increasing Bernoulli index")]
    NotStrictlyIncreasing,
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("rejection sampling gave up after {0} attempts (degenerate domain parameters?)")]
    RejectionCap(usize),
    #[error("utility undefined: {0}")]
    DomainViolation(String),
    #[error("invalid noise model: {0}")]
    InvalidNoise(String),
    #[error("invalid utility family: {0}")]
    InvalidFamily(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("{0}")]
    Config(String),
    #[error("numerical guard failed: {0}")]
    Numerical(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
