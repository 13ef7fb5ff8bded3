use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid or incomplete configuration (missing coefficient, bad grid, ...).
    #[error("configuration error: {0}")]
    Config(String),

    /// An argument outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A coefficient or nonlinearity produced a non-finite value.
    #[error("evaluation failed at x = {x:?}, t = {t}: {what}")]
    Evaluation { x: Vec<f64>, t: f64, what: String },

    /// The requested combination is valid input but not handled by this operation.
    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    /// Initial data does not satisfy the boundary condition.
    #[error("boundary condition violated: relative defect {defect:e} exceeds {tolerance:e}")]
    BoundaryViolation { defect: f64, tolerance: f64 },

    #[error("Picard iteration did not converge at step {step} after {iterations} iterations (last relative residual {residual:e})")]
    PicardNonConvergence {
        step: usize,
        iterations: usize,
        residual: f64,
    },

    #[error("solution diverged (non-finite values) at step {step}")]
    Divergence { step: usize },

    #[error("singular matrix: zero pivot in column {column}")]
    Singular { column: usize },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for numerical failures (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::PicardNonConvergence { .. }
                | Error::Divergence { .. }
                | Error::Singular { .. }
                | Error::Evaluation { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
