use thiserror::Error;

/// Problems found while turning raw key-value input into a [`crate::SystemConfig`].
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("missing required key `{0}`")]
    MissingKey(String),
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("invalid value `{value}` for `{key}`: {reason}")]
    InvalidValue {
        key: String,
        value: String,
        reason: String,
    },
    #[error("{key} must be {constraint}")]
    OutOfRange { key: String, constraint: String },
}

impl ConfigError {
    /// The key this error is about, if any.
    pub fn key(&self) -> &str {
        match self {
            ConfigError::MissingKey(k) | ConfigError::UnknownKey(k) => k,
            ConfigError::InvalidValue { key, .. } | ConfigError::OutOfRange { key, .. } => key,
        }
    }

    pub(crate) fn range(key: &str, constraint: &str) -> Self {
        ConfigError::OutOfRange {
            key: key.to_string(),
            constraint: constraint.to_string(),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error")]
    Config(#[from] ConfigError),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },
    #[error("state has zero norm")]
    ZeroNorm,
    #[error("invalid initial state: {0}")]
    InitialState(String),
    #[error("integration failed at t = {time}: {reason}")]
    Integration { time: f64, reason: String },
    #[error("trajectory stalled at t = {time}: norm target {target} unreached and total jump weight is zero")]
    Stalled { time: f64, target: f64 },
    #[error("no termination possible: all dissipation rates are zero and no t_max is configured")]
    NoTermination,
    #[error("dimension {dim} exceeds the dense limit of {limit}")]
    TooLarge { dim: usize, limit: usize },
    #[error("matrix is not Hermitian (max deviation {deviation:e})")]
    NonHermitian { deviation: f64 },
    #[error("eigensolver failed: {0}")]
    Eigensolver(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("trajectory {index}")]
    Trajectory {
        index: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
