use thiserror::Error;

/// Errors raised by the estimators, tests and simulators.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum CtcError {
    /// Caller supplied arguments that violate an operation's preconditions.
    #[error("usage error: {0}")]
    Usage(String),
    /// A numeric input lies outside the domain of the function.
    #[error("domain error: {0}")]
    Domain(String),
    /// The estimator has no extreme observations to average over.
    #[error("degenerate estimate: {0}")]
    Degenerate(String),
    /// Generalized Pareto maximum-likelihood fit did not produce a usable optimum.
    #[error("GPD fit failed: {reason} (exceedances={exceedances}, attempts={attempts})")]
    Fit {
        reason: String,
        exceedances: usize,
        attempts: usize,
    },
    /// No lag reached the selection threshold.
    #[error("no delay found: no defined lag value reaches threshold {threshold}")]
    NoDelay { threshold: f64 },
    /// A simulated path left the finite range.
    #[error("simulation error: {0}")]
    Simulation(String),
}

impl CtcError {
    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        CtcError::Usage(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        CtcError::Domain(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, CtcError>;
