use thiserror::Error;

use crate::sdp::SolveOutcome;
use crate::volterra::DemodResult;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("starting point is infeasible (min eigenvalue {lambda_min:.3e}, max |diag| {max_diag:.3e})")]
    Infeasible { lambda_min: f64, max_diag: f64 },

    #[error("eigendecomposition did not converge after {sweeps} sweeps")]
    EigenNoConvergence { sweeps: usize },

    /// The cutting-plane loop hit its round cap; `lambda` is the last LP iterate.
    #[error("dual subproblem did not converge after {rounds} rounds (min eigenvalue {residual:.3e})")]
    DualNoConvergence {
        rounds: usize,
        residual: f64,
        lambda: Vec<f64>,
    },

    /// The iteration failed part-way; `partial` holds the last iterate and trace.
    #[error("solve aborted: {source}")]
    SolveAborted {
        source: Box<Error>,
        partial: Box<SolveOutcome>,
    },

    #[error("linear program: {0}")]
    Lp(#[from] crate::lp::LpError),

    #[error("demodulation failed: {source}")]
    Demod {
        source: Box<Error>,
        partial: Box<DemodResult>,
    },

    #[error("exhaustive search over 2^{nb} sequences exceeds the budget of 2^{max}")]
    Budget { nb: usize, max: usize },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }
}
