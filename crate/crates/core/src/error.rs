use thiserror::Error;

/// Errors raised by the estimation core and its applications.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("projection did not converge after {rounds} rounds (last change {change:e})")]
    ProjectionDiverged { rounds: usize, change: f64 },

    #[error("quadrature rule is degenerate: {0}")]
    DegenerateRule(String),

    #[error("smoothing is degenerate: {0}")]
    DegenerateSmoothing(String),

    #[error("no strictly feasible polynomial density of degree {degree} (margin {margin:e})")]
    SlaterInfeasible { degree: usize, margin: f64 },

    #[error("linear program is {0}")]
    LinearProgram(&'static str),

    #[error("regularity assumption fails: {0}")]
    Irregular(String),

    #[error("closure subproblem infeasible at t={time}: {reason}")]
    ClosureInfeasible { time: f64, reason: String },

    #[error("ODE step size underflow at t={time} (dt={dt:e})")]
    StepUnderflow { time: f64, dt: f64 },

    #[error("stationary distribution solve failed: {0}")]
    SingularGenerator(String),

    #[error("inner subproblem failed at outer iteration {iteration}: {source}")]
    Subproblem {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
