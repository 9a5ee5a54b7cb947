//! Unified error type for the toolkit.
//!
//! Numerical routines distinguish *caller* problems (bad parameters, domain
//! violations, malformed configs) from *solver* problems (bracketing or
//! convergence failures, step-size underflow). The CLI maps the former to
//! exit code 1 and the latter to exit code 2.

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A constructor or routine was handed a parameter outside its stated range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A function was evaluated outside its domain (e.g. a one-sided family at u < 0).
    #[error("domain violation: {0}")]
    Domain(String),

    /// A root bracket could not be established (monotonicity or growth
    /// assumptions of the model are violated).
    #[error("bracketing failed: {0}")]
    BracketFailure(String),

    /// An iterative solver exhausted its budget without meeting tolerance.
    #[error("no convergence: {0}")]
    NoConvergence(String),

    /// A derivative was requested exactly at a junction of a piecewise family.
    #[error("derivative at non-smooth point u = {u}: {context}")]
    NonSmooth { u: f64, context: String },

    /// The adaptive integrator could not meet tolerance above the step floor.
    #[error("step size underflow at t = {t}: required dt = {dt:e} below minimum {dt_min:e}")]
    StepUnderflow { t: f64, dt: f64, dt_min: f64 },

    /// Integration produced NaN or infinity.
    #[error("non-finite state at t = {t}")]
    NonFiniteState { t: f64 },

    /// Interpolation was asked to do something ill-posed (duplicate nodes,
    /// query outside the supported span).
    #[error("interpolation error: {0}")]
    Interpolation(String),

    /// A configuration file could not be parsed or is inconsistent.
    #[error("config error: {0}")]
    Config(String),
}

impl Error {
    /// True for errors that indicate a numerical failure at run time rather
    /// than a mistake in the inputs (used for process exit codes).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::BracketFailure(_)
                | Error::NoConvergence(_)
                | Error::StepUnderflow { .. }
                | Error::NonFiniteState { .. }
                | Error::Interpolation(_)
        )
    }
}
