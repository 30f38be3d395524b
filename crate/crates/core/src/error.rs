use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("non-finite integrand value {value} at node {node:?}")]
    Evaluation { node: Vec<f64>, value: f64 },

    #[error("expected Hessian is not positive definite (smallest eigenvalue {min_eigenvalue:e})")]
    IndefiniteHessian { min_eigenvalue: f64 },

    #[error("step rejected: {0}")]
    StepRejected(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("precision entry ({row}, {col}) = {value:e} lies outside the factor sparsity pattern")]
    PatternViolation { row: usize, col: usize, value: f64 },

    #[error("{0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
