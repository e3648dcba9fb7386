//! Numerical pipeline for recovering a potential from the nodal lines of
//! Dirichlet eigenfunctions on a rectangle: lattice enumeration and
//! Diophantine admissibility, synthetic test potentials, a sine-basis
//! Galerkin forward solver, first-order perturbation diagnostics, nodal
//! geometry, masked-domain first eigenvalues, and the reconstruction formula
//! q̂ = |α|² − λ₁,₀(Ω′).

pub mod domain_eig;
pub mod error;
pub mod grid;
pub mod lattice;
pub mod nodal;
pub mod perturbation;
pub mod potentials;
pub mod quad;
pub mod reconstruct;
pub mod spectral;

pub use error::{Error, Result};
