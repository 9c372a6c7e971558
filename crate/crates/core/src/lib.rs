//! Phase-space toolkit for multimode GKP codes.
//!
//! The crate is organised around three stages that feed each other:
//!
//! 1. [`lattice`] and [`stab_group`] turn a symplectically integral lattice
//!    into its group of Gaussian logical operations, presented by generators
//!    and Cayley-graph walks.
//! 2. [`envelope`] and [`compiler`] track how a finite-energy envelope is
//!    dragged around by those operations and pick, per logical gate, the
//!    representative that disturbs the envelope least.
//! 3. [`phase_sim`], [`lrb`] and [`sbs`] check the result: an exact
//!    Gaussian-sum Wigner simulator, logical randomized benchmarking on top
//!    of it, and small-big-small stabilization circuits for the envelopes
//!    the compiler produces.
//!
//! Conventions used throughout: quadratures are ordered `(q_1..q_N, p_1..p_N)`,
//! the symplectic form is `Omega = [[0, I], [-I, 0]]`, and lattices live in
//! units where one logical displacement cell has side `sqrt(2*pi)`.

pub mod compiler;
pub mod envelope;
pub mod error;
pub mod intmat;
pub mod lattice;
pub mod lrb;
pub mod phase_sim;
pub mod sbs;
pub mod stab_group;
pub mod symplectic;

pub use error::CoreError;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, CoreError>;

/// Re-exported matrix/vector aliases used across module boundaries.
pub mod prelude {
    pub use crate::envelope::{Envelope, ReferenceEnvelope};
    pub use crate::error::CoreError;
    pub use crate::intmat::IntMatrix;
    pub use crate::lattice::{CanonicalForm, GkpLattice, PauliCoset};
    pub use crate::symplectic::{AffineGaussianOp, RealMatrix, RealVector};
}
