use thiserror::Error;

/// Error taxonomy shared by the whole workspace.
///
/// The CLI maps these onto exit codes: configuration problems
/// (`Structural`, `Parameter`, `Dimension`) are exit 2, numerical failures
/// (`RootFind`, `Quadrature`, `Convergence`, `Eigen`, `Sampling`,
/// `Internal`) are exit 3, and a failed map validation is exit 4.
#[derive(Debug, Error)]
pub enum Error {
    #[error("structural error: {0}")]
    Structural(String),

    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("root finder failed: {0}")]
    RootFind(String),

    #[error("quadrature failed to converge: {0}")]
    Quadrature(String),

    #[error("solver failed to converge: {message} (last residual {residual:.3e})")]
    Convergence { message: String, residual: f64 },

    #[error("eigensolver failed: {0}")]
    Eigen(String),

    #[error("sampling error: {0}")]
    Sampling(String),

    #[error("internal consistency error: {0}")]
    Internal(String),

    #[error("map validation failed: {0}")]
    Validation(String),
}

pub type Result<T> = std::result::Result<T, Error>;
