use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid space: {0}")]
    InvalidSpace(String),

    #[error("point does not belong to the space: {0}")]
    InvalidPoint(String),

    #[error("value {value} of `{name}` is outside [{lower}, {upper}]")]
    OutOfBounds {
        name: String,
        value: f64,
        lower: f64,
        upper: f64,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid hyper-parameters: {0}")]
    InvalidHypers(String),

    #[error("kernel matrix is not positive definite after jitter escalation to {jitter:e}")]
    NotPositiveDefinite { jitter: f64 },

    #[error("training targets contain non-finite values")]
    NonFiniteTargets,

    #[error("log target is not finite at the initial state")]
    NonFiniteLogTarget,

    #[error("oracle limit exceeded: {0}")]
    OracleTooLarge(String),

    #[error("unknown benchmark `{name}`; available: {available}")]
    UnknownBenchmark { name: String, available: String },

    #[error("benchmark data: {0}")]
    BenchmarkData(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
