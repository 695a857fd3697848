use thiserror::Error;

/// Failures raised by the simulation, quadrature and verification routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A function handed to a routine breaks its sign contract (e.g. a
    /// Feynman–Kac potential that is positive somewhere).
    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error("no convergence after {iterations} iterations (last sup-change {residual:e})")]
    ConvergenceFailure { iterations: usize, residual: f64 },

    /// Forward integration refused because the mode would grow by more than
    /// `e^limit` over the requested horizon.
    #[error("ill-posed forward solve: mode {mode} has growth exponent {exponent} > {limit}")]
    IllPosed { mode: usize, exponent: f64, limit: f64 },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
