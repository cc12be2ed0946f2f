use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: {what} has length {got}, expected {expected}")]
    Dimension {
        what: &'static str,
        got: usize,
        expected: usize,
    },

    /// The interior-point solver stopped without meeting its targets. The best
    /// iterate's residuals are carried so callers can decide whether to retry.
    #[error(
        "solver did not converge after {iterations} iterations \
         (gap {gap:.3e}, primal residual {primal_residual:.3e}, dual residual {dual_residual:.3e})"
    )]
    SolverFailed {
        iterations: usize,
        gap: f64,
        primal_residual: f64,
        dual_residual: f64,
    },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn check_len(what: &'static str, got: usize, expected: usize) -> Result<()> {
        if got == expected {
            Ok(())
        } else {
            Err(Error::Dimension {
                what,
                got,
                expected,
            })
        }
    }
}
