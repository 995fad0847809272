use thiserror::Error;

/// Errors raised anywhere in the simulator.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid covariance: {0}")]
    InvalidCovariance(String),

    #[error("non-finite input to {0}")]
    NonFinite(&'static str),

    #[error("{what} must be non-negative, got {value}")]
    Negative { what: &'static str, value: f64 },

    #[error("singular correlation: {0}")]
    SingularCorrelation(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("pilot shortage: tau = {tau} < K = {users}")]
    PilotShortage { tau: usize, users: usize },

    #[error("invalid aging operator for this R_k")]
    InvalidAgingOperator,

    #[error("closed form requires common σ_φ² across BS antennas")]
    HeterogeneousBsVariance,

    #[error("zero effective channel")]
    ZeroEffectiveChannel,

    #[error("zero denominator in SINR for user {0}")]
    ZeroDenominator(usize),

    #[error("target rate infeasible: {0}")]
    TargetInfeasible(String),

    #[error("invalid value for `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
