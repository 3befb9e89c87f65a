//! Error type shared by every module of the laboratory.

use thiserror::Error;

/// Failure modes of laboratory operations.
///
/// Numerical infinities that are part of the mathematics (for example a
/// relative entropy with a support violation) are returned as values, not as
/// errors.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabError {
    /// Arguments outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A matrix that must be strictly positive is not.
    #[error("singular input `{what}`: minimal eigenvalue {min_eigenvalue:e}")]
    Singularity { what: String, min_eigenvalue: f64 },

    /// Invalid parameters or configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// Invalid model specification.
    #[error("model error: {0}")]
    Model(String),

    /// The request exceeds a hard size cap or an unsupported model class.
    #[error("capability exceeded: {0}")]
    Capability(String),

    /// An iterative method did not reach its tolerance.
    #[error("no convergence in {context}: residual {residual:e}")]
    Convergence { context: String, residual: f64 },

    /// A time search ran past its horizon.
    #[error("horizon {horizon} exceeded; last distance {last_distance:e}")]
    Horizon { horizon: f64, last_distance: f64 },
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, LabError>;
