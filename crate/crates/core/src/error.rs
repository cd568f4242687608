use thiserror::Error;

/// Errors produced by solvers, generators and learners.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("invalid MDP: {0}")]
    InvalidMdp(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("solver did not converge within {iterations} iterations (last update {last_delta:e})")]
    NotConverged { iterations: usize, last_delta: f64 },

    #[error("infeasible budget: {iterations} iterations need at least {iterations} samples, got {total}")]
    InfeasibleBudget { iterations: usize, total: u64 },

    #[error("unknown environment `{0}`")]
    UnknownEnv(String),

    #[error("malformed environment spec `{spec}`: {reason}")]
    BadEnvSpec { spec: String, reason: String },

    #[error("environment `{0}` has no tabular model")]
    NoModel(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter { name, reason: reason.into() }
}
