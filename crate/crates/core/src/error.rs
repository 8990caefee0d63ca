use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("matrix contains non-finite entries")]
    NonFinite,

    #[error("matrix is not hermitian (entry ({row}, {col}) breaks conjugate symmetry)")]
    NotHermitian { row: usize, col: usize },

    #[error("matrix is singular at pivot {pivot}")]
    Singular { pivot: usize },

    #[error("not in upper half-plane: smallest eigenvalue of Im(b) is {min_eigenvalue:e}")]
    NotInUpperHalfPlane { min_eigenvalue: f64 },

    #[error("hermitian eigensolver did not converge after {iterations} QL iterations")]
    EigenNonConvergence { iterations: usize },

    #[error("fixed-point iteration did not converge: {iterations} iterations, last residual {last_residual:e}")]
    NonConvergence { iterations: usize, last_residual: f64 },

    #[error("covariance map is declared {declared} but level-{level} amplification requires {level}-positivity")]
    NotKPositive { declared: &'static str, level: usize },

    #[error("measure has zero total mass")]
    ZeroMass,

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("json: {0}")]
    Json(String),
}

impl Error {
    /// True for failures of an iterative numerical method, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::EigenNonConvergence { .. } | Error::NonConvergence { .. } | Error::Singular { .. }
        )
    }
}

impl From<serde_json::Error> for Error {
    fn from(err: serde_json::Error) -> Self {
        Error::Json(err.to_string())
    }
}
