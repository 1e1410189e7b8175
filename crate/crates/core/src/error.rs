//! Error taxonomy shared by all analysis modules.

use thiserror::Error;

/// Errors produced by model construction and the numerical routines.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    /// A physical parameter or argument violates its documented domain.
    #[error("domain error in {context}: {message}")]
    Domain { context: &'static str, message: String },

    /// A config field failed validation; carries the offending field path.
    #[error("invalid config field `{field}`: {message}")]
    InvalidField { field: String, message: String },

    /// Gas inlet velocity reached the stagnation limit v^2 >= 2 cp T.
    #[error("stagnation violation: |v0| = {v0} m/s exceeds the isentropic limit {v_max} m/s")]
    StagnationViolation { v0: f64, v_max: f64 },

    /// CFL condition would be violated; the caller should retry with `suggested_dt`.
    #[error("CFL violation: dt = {dt} exceeds limit {dt_limit}")]
    CflViolation { dt: f64, dt_limit: f64 },

    /// Pressure dropped to or below zero somewhere in the pipe.
    #[error("flow reversal: non-positive pressure {pressure} Pa at t = {t} s")]
    FlowReversal { t: f64, pressure: f64 },

    /// The mass matrix of the quarter-wave model could not be inverted.
    #[error("singular assembly matrix in {context}")]
    SingularAssembly { context: &'static str },

    /// Sliding-Jacobian transversality C*J*B vanished.
    #[error("transversality failure: |C J B| = {magnitude} below threshold")]
    TransversalityFailure { magnitude: f64 },

    /// A root/fixed-point solve did not converge.
    #[error("solver failed in {context}: {message}")]
    SolverFailure { context: &'static str, message: String },

    /// The requested point/state does not satisfy the operation's premise.
    #[error("precondition violated in {context}: {message}")]
    Precondition { context: &'static str, message: String },

    /// I/O error surfaced from file-backed inputs (tables, configs).
    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn domain(context: &'static str, message: impl Into<String>) -> Self {
        Error::Domain { context, message: message.into() }
    }

    pub(crate) fn field(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::InvalidField { field: field.into(), message: message.into() }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
