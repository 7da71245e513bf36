use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("shape error: {0}")]
    Shape(String),

    /// A Hermitian matrix that should be nonnegative definite has an eigenvalue
    /// below the clipping tolerance.
    #[error("matrix is not nonnegative definite: eigenvalue {eigenvalue:e}{}", context.as_deref().map(|c| format!(" ({c})")).unwrap_or_default())]
    Definiteness {
        eigenvalue: f64,
        context: Option<String>,
    },

    #[error("matrix is not positive definite: pivot {pivot:e} at elimination step {index}")]
    NotPositiveDefinite { index: usize, pivot: f64 },

    #[error("imaginary residual {residual:e} exceeds tolerance {tolerance:e}")]
    SymmetryViolation { residual: f64, tolerance: f64 },

    #[error("inconsistent input: {0}")]
    Inconsistent(String),

    #[error("degenerate kernel: support radius {radius} is below the cell spacing {spacing}")]
    DegenerateKernel { radius: f64, spacing: f64 },

    #[error("wrong operation: {0}")]
    WrongOperation(String),

    #[error("undefined index: {0}")]
    UndefinedIndex(String),

    #[error("finite-difference step error: {0}")]
    Step(String),

    #[error("maximum likelihood estimate on the search boundary at {theta:?}")]
    Boundary { theta: [f64; 2] },

    #[error("format error: {0}")]
    Format(String),

    #[error("length error: expected {expected} bytes, found {found}")]
    Length { expected: usize, found: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures of the numerics on valid input (as opposed to bad
    /// configuration or malformed files).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Definiteness { .. }
                | Error::NotPositiveDefinite { .. }
                | Error::SymmetryViolation { .. }
                | Error::UndefinedIndex(_)
                | Error::Step(_)
                | Error::Boundary { .. }
        )
    }
}
