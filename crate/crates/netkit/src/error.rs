use thiserror::Error;

/// Errors produced by state construction, conditioning and rate evaluation.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// Modulation variance below the vacuum limit.
    #[error("invalid modulation: mu must be >= 1, got {0}")]
    InvalidModulation(f64),

    /// A scalar parameter outside its admissible range.
    #[error("domain error: {0}")]
    Domain(String),

    /// Matrix dimensions do not match the operation.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A covariance matrix failed the symmetry check.
    #[error("matrix not symmetric: max |V - V^T| = {0:.3e} exceeds 1e-12")]
    NotSymmetric(f64),

    /// A symplectic eigenvalue fell below the physical threshold.
    #[error("unphysical state: symplectic eigenvalue {0} < 1 - 1e-6")]
    Unphysical(f64),

    /// A matrix failed the symplectic-condition check.
    #[error("not symplectic: max |S Omega S^T - Omega| = {0:.3e} exceeds 1e-10")]
    NotSymplectic(f64),

    /// Invalid user bipartition for secret sharing.
    #[error("invalid split: {0}")]
    Split(String),

    /// An operation received an empty collection or range.
    #[error("empty input: {0}")]
    Empty(String),

    /// Invalid finite-size security parameters.
    #[error("invalid finite-size parameters: {0}")]
    FiniteSize(String),
}

pub type Result<T> = std::result::Result<T, Error>;
