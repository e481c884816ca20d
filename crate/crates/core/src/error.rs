use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;

use crate::fields::ControlPair;
use crate::optimizer::IterateRecord;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A potential was evaluated outside its domain.
    #[error("value {value} outside the potential's domain")]
    Domain { value: f64 },

    #[error("newton iteration failed at step {step} (residual {residual:e})")]
    NewtonFailure { step: usize, residual: f64 },

    #[error("singular step matrix at step {step}")]
    SingularMatrix { step: usize },

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("line search stalled at iteration {iter}")]
    Stalled {
        iter: usize,
        control: Box<ControlPair>,
        history: Vec<IterateRecord>,
    },

    #[error("iteration {iter}: {source}")]
    AtIterate { iter: usize, source: Box<Error> },
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn check_len(expected: usize, found: usize) -> crate::Result<()> {
        if expected == found {
            Ok(())
        } else {
            Err(Error::DimensionMismatch { expected, found })
        }
    }

    /// True for failures raised by the nonlinear or linear solvers.
    pub fn is_solver_failure(&self) -> bool {
        match self {
            Error::NewtonFailure { .. } | Error::SingularMatrix { .. } | Error::Stalled { .. } => {
                true
            }
            Error::AtIterate { source, .. } => source.is_solver_failure(),
            _ => false,
        }
    }
}
