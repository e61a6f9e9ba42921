use thiserror::Error;

use crate::signal::Signal;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    ShapeMismatch { expected: Vec<usize>, got: Vec<usize> },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid signal: {0}")]
    InvalidSignal(String),

    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error("{solver} did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged {
        solver: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("iteration diverged at step {iteration}")]
    Diverged {
        iteration: usize,
        /// Last iterate whose entries were all finite.
        last_finite: Box<Signal>,
    },

    #[error("fixed-point iteration did not converge in {iterations} iterations (contraction estimate {contraction})")]
    FixedPointNotConverged { iterations: usize, contraction: f64 },

    #[error("backtracking exhausted after {halvings} halvings (F before {f_before:e}, F after {f_after:e})")]
    BacktrackingExhausted {
        halvings: usize,
        f_before: f64,
        f_after: f64,
    },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn shape(expected: &[usize], got: &[usize]) -> Self {
        Error::ShapeMismatch {
            expected: expected.to_vec(),
            got: got.to_vec(),
        }
    }
}
