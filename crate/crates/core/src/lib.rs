//! Superintegrable Hamiltonian systems from sl(2) and sl_z(2) Poisson
//! coalgebras: symplectic realizations, universal integrals, numerical
//! verification of the bracket structure, induced Riemannian geometry
//! (metrics, Gaussian curvature) and geodesic/potential dynamics.
//!
//! Derivatives are exact throughout, computed with nestable dual numbers;
//! finite differences appear only as independent oracles inside tests.

pub mod catalog;
pub mod cli;
pub mod coalgebra;
pub mod dynamics;
pub mod expr;
pub mod geometry;
pub mod phase;
pub mod scalar;

use scalar::Dual;

/// Base floating-point type used by the CLI and the concrete APIs.
pub type Real = f64;
/// First-derivative scalar.
pub type D1 = Dual<Real>;
/// Second-derivative (hyper-dual) scalar.
pub type D2 = Dual<D1>;
/// Third-derivative scalar.
pub type D3 = Dual<D2>;
