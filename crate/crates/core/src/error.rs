use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{what} out of domain: {value}")]
    Domain { what: &'static str, value: f64 },

    #[error("position error bound is unbounded: {reason}")]
    UnboundedPeb { reason: String },

    #[error("quadrature did not converge: error estimate {achieved:e} above requested {requested:e}")]
    Quadrature { achieved: f64, requested: f64 },

    #[error("constraint {constraint} violated: {detail}")]
    ConstraintViolation { constraint: &'static str, detail: String },

    #[error("matrix is not positive semidefinite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPsd { min_eigenvalue: f64 },

    #[error("relaxed problem is infeasible: {0}")]
    Infeasible(String),

    #[error("no feasible point in bisection bracket (upper end {eta_hi:e})")]
    NoFeasiblePoint { eta_hi: f64 },

    #[error("randomization produced no feasible candidate out of {samples} samples")]
    RandomizationFailed { samples: usize },

    #[error("test point {point} has no admissible serving option")]
    InfeasibleRow { point: usize },

    #[error("threshold cannot be met; tightest satisfiable value is about {tightest:e}")]
    InfeasibleThreshold { tightest: f64 },

    #[error("exhaustive search needs {required} row evaluations, budget is {limit}")]
    BudgetExceeded { required: u128, limit: u128 },

    #[error("invalid {field}: {message}")]
    Validation { field: String, message: String },

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation { field: field.into(), message: message.into() }
    }

    /// True for the errors that mean "no plan satisfies the thresholds" as
    /// opposed to bad input or numerical trouble.
    pub fn is_infeasibility(&self) -> bool {
        matches!(
            self,
            Error::Infeasible(_)
                | Error::NoFeasiblePoint { .. }
                | Error::RandomizationFailed { .. }
                | Error::InfeasibleRow { .. }
                | Error::InfeasibleThreshold { .. }
        )
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse { line: e.line(), column: e.column(), message: e.to_string() }
    }
}
