use thiserror::Error;

/// Errors raised by the shell DPG library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum DpgError {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("unsupported quadrature degree {degree} (max {max})")]
    UnsupportedDegree { degree: usize, max: usize },

    #[error("singular material law: poisson ratio {0} must satisfy |nu| < 1")]
    SingularMaterial(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("element {element}: test-space Gram matrix is not positive definite")]
    SingularGram { element: usize },

    #[error("linear solver failed: {0}")]
    Solver(String),
}

pub type Result<T, E = DpgError> = std::result::Result<T, E>;
