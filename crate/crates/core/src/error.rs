use thiserror::Error;

/// Errors raised by the solvers and evaluators in this crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {what} (expected {expected}, got {got})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate channel set: all columns vanish")]
    DegenerateChannelSet,

    #[error("bisection failed to bracket the dual multiplier: {0}")]
    Bisection(String),

    #[error("robust design infeasible at epsilon = {epsilon}, tau = ({tau1}, {tau2}): {detail}")]
    RobustInfeasible {
        epsilon: f64,
        tau1: f64,
        tau2: f64,
        detail: String,
    },

    #[error("conic solver: {0}")]
    Conic(String),

    /// A solver produced a point that violates a property it must satisfy.
    #[error("internal consistency check failed: {0}")]
    Consistency(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { what, expected, got });
    }
    Ok(())
}
