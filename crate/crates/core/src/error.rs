use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: String, actual: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("index ({row}, {col}) outside {height}x{width} image")]
    Index {
        row: usize,
        col: usize,
        height: usize,
        width: usize,
    },

    #[error("matrix is not tangent at the base point (residual {residual:e})")]
    NotTangent { residual: f64 },

    #[error("point is not on the oblique manifold: {0}")]
    NotOnManifold(String),

    #[error("operator Gram matrix is numerically singular (smallest eigenvalue {smallest_eigenvalue:e})")]
    Singular { smallest_eigenvalue: f64 },

    #[error("coherence barrier violated by atoms {i} and {j} (inner product {inner:e})")]
    BarrierViolation { i: usize, j: usize, inner: f64 },

    #[error("line search found no acceptable step above {min_step:e} (slope {slope:e}, cost {cost:e})")]
    LineSearch {
        min_step: f64,
        slope: f64,
        cost: f64,
    },
}

impl Error {
    pub(crate) fn dim(expected: impl ToString, actual: impl ToString) -> Self {
        Error::Dimension {
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }

    /// True for errors that mean the point left the feasible region of the
    /// objective (a line-search trial may shrink past them).
    pub fn is_infeasible(&self) -> bool {
        matches!(self, Error::Singular { .. } | Error::BarrierViolation { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
