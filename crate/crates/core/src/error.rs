use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid tree: {0}")]
    InvalidTree(String),

    #[error("invalid extended Prüfer code: {0}")]
    InvalidCode(String),

    #[error("unsupported size n={n}: {reason}")]
    UnsupportedSize { n: usize, reason: &'static str },

    #[error("invalid adjacency matrix: {0}")]
    InvalidMatrix(String),

    #[error("power iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("degenerate size n={0}: extrema coincide, normalization undefined")]
    DegenerateSize(usize),

    #[error("extrema table does not cover n={0}")]
    TableRange(usize),

    #[error("empty sample")]
    EmptySample,

    #[error("insufficient samples: need at least {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("requested {requested} elements from a sample of {available}")]
    SampleSize { requested: usize, available: usize },

    #[error("degenerate distribution: {0}")]
    DegenerateDistribution(&'static str),

    #[error("degenerate labels: need at least two examples of each class in the training split")]
    DegenerateLabels,

    #[error("zero variance in paired differences")]
    ZeroVariance,

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
