use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("measure `{0}` is atomic and has no density")]
    AtomicMeasure(String),

    #[error("argument {value} outside the domain of `{op}`: {reason}")]
    Domain {
        op: &'static str,
        value: f64,
        reason: String,
    },

    #[error("quadrature did not reach tolerance {tol:e} (estimated error {err:e})")]
    QuadratureFailure { tol: f64, err: f64 },

    #[error("root finder failed for `{op}` at {target} after {iterations} iterations")]
    ConvergenceFailure {
        op: &'static str,
        target: f64,
        iterations: usize,
    },

    #[error("{0}")]
    NotApplicable(String),

    #[error("membership certificate failed re-verification: {0}")]
    NumericalInstability(String),

    #[error("operation budget exceeded: {required:e} > cap {cap:e}")]
    BudgetExceeded { required: f64, cap: f64 },

    #[error("rejection sampler acceptance rate {rate:e} below 1e-4")]
    RejectionTooSlow { rate: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Errors caused by the caller's arguments rather than by a numerical
    /// routine. The CLI maps these to exit status 2.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidInput(_)
                | Error::Domain { .. }
                | Error::AtomicMeasure(_)
                | Error::NotApplicable(_)
                | Error::BudgetExceeded { .. }
        )
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn domain(op: &'static str, value: f64, reason: impl Into<String>) -> Self {
        Error::Domain {
            op,
            value,
            reason: reason.into(),
        }
    }
}
