use alloc::boxed::Box;
use alloc::string::String;
use core::fmt;

use crate::domain::Field;

pub type Result<T> = core::result::Result<T, Error>;

/// Failure modes shared by every module.
#[derive(Debug, Clone)]
pub enum Error {
    /// A precondition on the inputs does not hold.
    InvalidArgument(String),
    /// The boundary map was evaluated outside the set where it is defined
    /// (negative boundary values with `alpha = 0`).
    Domain(String),
    /// An eigen- or linear solver broke down.
    NumericFailure { what: String, iterations: usize },
    /// Newton hit its iteration cap. Carries the best iterate.
    NonConvergence {
        iterations: usize,
        residual: f64,
        best: Box<Field>,
    },
    /// The monotone iteration lost its ordering.
    MonotonicityFailure { iteration: usize, node: usize, excess: f64 },
    /// A traced continuum did not connect the way it should.
    TopologyFailure(String),
    /// The trivial-line contact could not be located.
    EstimationFailure(String),
    /// Homotopy branch distances failed to decrease.
    Divergence(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn numeric(what: impl Into<String>, iterations: usize) -> Self {
        Error::NumericFailure {
            what: what.into(),
            iterations,
        }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidArgument(m) => write!(f, "invalid argument: {m}"),
            Error::Domain(m) => write!(f, "domain error: {m}"),
            Error::NumericFailure { what, iterations } => {
                write!(f, "numeric failure after {iterations} iterations: {what}")
            }
            Error::NonConvergence {
                iterations, residual, ..
            } => write!(
                f,
                "no convergence after {iterations} iterations (residual {residual:e})"
            ),
            Error::MonotonicityFailure {
                iteration,
                node,
                excess,
            } => write!(
                f,
                "monotone ordering violated at node {node} in sweep {iteration} (by {excess:e})"
            ),
            Error::TopologyFailure(m) => write!(f, "topology failure: {m}"),
            Error::EstimationFailure(m) => write!(f, "estimation failure: {m}"),
            Error::Divergence(m) => write!(f, "divergence: {m}"),
        }
    }
}

impl core::error::Error for Error {}
