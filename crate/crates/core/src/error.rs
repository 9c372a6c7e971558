//! Error type shared by every stage of the toolkit.

use thiserror::Error;

/// Anything that can go wrong between lattice input and benchmark output.
#[derive(Debug, Error)]
pub enum CoreError {
    /// Generator matrix is not square, not even-dimensional, or singular.
    #[error("invalid lattice generator: {0}")]
    InvalidGenerator(String),

    /// Gram matrix `S Omega S^T` has non-integer entries.
    #[error("lattice is not symplectically integral: {0}")]
    NotIntegral(String),

    /// Generator matrix has negative orientation; relabel a mode or swap two
    /// rows so that `det S > 0`.
    #[error("lattice generator has det < 0; the canonical pairing fixes the orientation")]
    Orientation,

    /// A matrix expected to be symplectic fails `M Omega M^T = Omega`.
    #[error("matrix is not symplectic (residual {residual:.3e})")]
    NotSymplectic { residual: f64 },

    /// A candidate group element fails the defining quadratic constraint.
    #[error("X does not solve the group constraint: {0}")]
    NotSolution(String),

    /// Dimension mismatch between operands.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// Covariance input is not symmetric positive definite.
    #[error("covariance is not positive definite: {0}")]
    NotPositiveDefinite(String),

    /// Decay-curve fit failed to converge or produced no positive lifetime.
    #[error("fit failed: {0}")]
    Fit(String),

    /// A requested logical gate is outside the compiler's gate set.
    #[error("unsupported gate: {0}")]
    UnsupportedGate(String),

    /// Malformed run configuration.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// An enumeration blew past its combinatorial cap.
    #[error("enumeration overflow: {0}")]
    Overflow(String),

    /// JSON (de)serialization failure for lattice or run inputs.
    #[error("serialization: {0}")]
    Serde(#[from] serde_json::Error),

    /// Filesystem failure while reading inputs or writing results.
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}
