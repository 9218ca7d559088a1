use thiserror::Error;

/// Errors raised by the model, the solvers and the orchestration layer.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("configuration parse error: {0}")]
    Parse(String),

    #[error("action {action:?} is not feasible in state {state}")]
    InfeasibleAction { action: crate::model::Action, state: String },

    #[error("non-positive net income {net_income} in state {state}")]
    NonPositiveIncome { net_income: f64, state: String },

    #[error("negative gross income {0}")]
    NegativeGross(f64),

    #[error("non-finite value at {0}")]
    NonFinite(String),

    #[error("training diverged: {0}")]
    Training(String),

    #[error("hash mismatch: artifact was built for model {expected}, config has {found}")]
    HashMismatch { expected: String, found: String },

    #[error("no root of the compensating-consumption equation in ({lo}, {hi})")]
    NoRoot { lo: f64, hi: f64 },

    #[error("horizon mismatch: {0}")]
    Horizon(String),

    #[error("artifact format error: {0}")]
    Format(String),

    #[error("unknown solver `{0}`")]
    UnknownSolver(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Short machine-readable tag used in CLI error JSON.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Config { .. } => "config",
            Error::Parse(_) => "parse",
            Error::InfeasibleAction { .. } => "infeasible_action",
            Error::NonPositiveIncome { .. } => "non_positive_income",
            Error::NegativeGross(_) => "negative_gross",
            Error::NonFinite(_) => "non_finite",
            Error::Training(_) => "training",
            Error::HashMismatch { .. } => "hash_mismatch",
            Error::NoRoot { .. } => "no_root",
            Error::Horizon(_) => "horizon",
            Error::Format(_) => "format",
            Error::UnknownSolver(_) => "unknown_solver",
            Error::Io { .. } => "io",
        }
    }

    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
