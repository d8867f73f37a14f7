//! Numerical toolkit for invariant manifolds of Lévy-driven semilinear SPDEs.
//!
//! The crate simulates mild solutions of
//! `dr = (A r + alpha(r)) dt + sigma(r) dW + gamma(r-) dX`,
//! and checks, for a manifold given through explicit charts, whether jump
//! volatilities of small-jump drivers are tangent, whether the manifold is
//! closed under jumps, and how flat it is (the largest subspace contained in
//! all nearby tangent spaces).

pub mod check;
pub mod error;
pub mod hilbert;
pub mod interp;
pub mod levy;
pub mod manifold;
pub mod models;
pub mod spde;
mod quad;

pub use error::{Error, Result};
pub use hilbert::{GridSpace, HVector, Subspace};
pub use levy::{DriverPath, JumpEvent, JumpMeasureSpec, LevyDriver};
