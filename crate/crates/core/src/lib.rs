//! Discontinuous Galerkin dG(q−1) time discretization of linear parabolic
//! systems `u' + A(t)u = f` on `R^d`.
//!
//! The crate is organized bottom-up:
//!
//! * [`polyquad`]: Radau IIA tableaux, Lagrange and Legendre bases, Gauss rules.
//! * [`timefun`]: uniform meshes, piecewise polynomials in time, `Lᵖ`/`ℓᵖ` norms.
//! * [`operators`]: spatial operator models `A` and `A(t)`.
//! * [`dgsolve`]: the slab-by-slab dG solver and the equivalent Radau IIA
//!   scheme with averaged forcing.
//! * [`reconinterp`]: the Radau reconstruction `Û` and the orthogonal interpolant `ũ`.
//! * [`estimate`]: residuals, a posteriori bounds and maximal-regularity diagnostics.

pub mod dgsolve;
pub mod error;
pub mod estimate;
pub mod operators;
pub mod polyquad;
pub mod reconinterp;
pub mod timefun;

pub use error::{DgError, Result};
