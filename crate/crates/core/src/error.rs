use thiserror::Error;

/// Broad failure classes; the command line front end maps each to its own
/// exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Input,
    Precondition,
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("space is disconnected: point {unreached} is not reachable from point {from}")]
    Disconnected { from: usize, unreached: usize },

    #[error("generator set is not symmetric: inverse of generator {index} is missing")]
    NonSymmetricGenerators { index: usize },

    #[error("operators live on different spaces")]
    SpaceMismatch,

    #[error("propagation {propagation} exceeds lifting window R = {window}")]
    PropagationExceedsWindow { propagation: u32, window: u32 },

    #[error("support radius {support} exceeds {limit_name} = {limit}")]
    SupportTooLarge {
        support: u32,
        limit: u32,
        limit_name: &'static str,
    },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidInput(_) | Error::Json(_) | Error::Io(_) => ErrorKind::Input,
            Error::NonConvergence { .. } => ErrorKind::Numerical,
            _ => ErrorKind::Precondition,
        }
    }

    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn pre(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
