//! Error type shared by all solvers and front ends.

use thiserror::Error;

/// Errors produced by lattice setup, solvers, and the experiment drivers.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter, state vector, or configuration value is outside its
    /// documented domain. Carries the offending field and the reason.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// An iterative solver exhausted its budget without meeting the
    /// requested residual tolerance.
    #[error("solver did not converge: {what} (residual {residual:.3e})")]
    NonConvergence {
        /// Which solve failed.
        what: String,
        /// Residual norm at the point of giving up.
        residual: f64,
    },

    /// The adaptive integrator could not take a step above its minimum
    /// step size. The last accepted state and time are preserved so the
    /// caller can inspect how far the integration got.
    #[error("integrator step size underflow at t = {t}")]
    StepSizeUnderflow {
        /// Time of the last accepted step.
        t: f64,
        /// State at the last accepted step.
        state: Vec<f64>,
    },

    /// A state vector violates the consistency equations beyond the
    /// tolerance required by the operation.
    #[error("consistency residual {residual:.3e} exceeds limit {limit:.3e}")]
    Inconsistent {
        /// Measured max-norm residual of the consistency equations.
        residual: f64,
        /// Largest residual the operation accepts.
        limit: f64,
    },

    /// A property or validation suite failed. Carries the name of the
    /// failing check.
    #[error("validation failed: {0}")]
    ValidationFailed(String),

    /// A linear system that should be solvable (up to the known rank
    /// deficiency of a generator) turned out singular.
    #[error("singular linear system: {0}")]
    Singular(String),
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code for the CLI: 1 validation failure,
    /// 2 solver non-convergence, 3 invalid input.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::ValidationFailed(_) => 1,
            Error::NonConvergence { .. }
            | Error::StepSizeUnderflow { .. }
            | Error::Singular(_) => 2,
            Error::InvalidInput(_) | Error::Inconsistent { .. } => 3,
        }
    }
}
