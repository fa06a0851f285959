//! Numerical construction of clustered bound states for the
//! Schrödinger–Poisson–Slater system
//!
//! ```text
//!   -Δu + V(εx)u + ε²φ_u u = u^p,    -Δφ_u = u²,    x ∈ ℝ³
//! ```
//!
//! by Lyapunov–Schmidt reduction around sums of translated ground states.
//!
//! The crate is organised bottom-up:
//!
//! - [`radial`]: the radial ground state `U` of `-ΔU + U = U^p`, its decay
//!   constant and the spectrum of the linearised operator.
//! - [`integrals`]: the Newtonian potential of `U²` and the constants that
//!   appear in the reduced energy.
//! - [`field3d`]: cubic grids, fields, the free-space Poisson solver, the
//!   multi-bump ansatz and the admissible-configuration check.
//! - [`functional`]: the energy, its derivatives, the projection onto the
//!   complement of the tangent space and the auxiliary-equation solver.
//! - [`reduced`]: the finite-dimensional reduced energy, its minimisation and
//!   scaling-law fits.

pub mod error;
pub mod field3d;
pub mod functional;
pub mod integrals;
pub mod linalg;
pub mod quadrature;
pub mod radial;
pub mod reduced;

pub use error::{Error, Result};
