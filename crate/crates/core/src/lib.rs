//! Eisenstein series twisted by finite-dimensional representations of a
//! Fuchsian group that are unitary at the cusps.
//!
//! The pieces, bottom up:
//! - [`hyperbolic`]: points, boundary points and PSL₂(ℝ) elements.
//! - [`group`]: generators, fundamental domain, cusps, words, cosets.
//! - [`representation`]: the twist χ and its cusp data.
//! - [`special`] and [`quadrature`]: Γ, K-Bessel, Whittaker, Green function.
//! - [`eisenstein`]: direct sums, Kloosterman sums, Fourier expansion.
//! - [`kernels`]: automorphic kernels, principal parts, resolvent.
//! - [`config`]: the run-config schema shared with the CLI.

pub mod config;
pub mod eisenstein;
pub mod error;
pub mod group;
pub mod hyperbolic;
pub mod kernels;
pub mod linalg;
pub mod quadrature;
pub mod representation;
pub mod special;

pub use error::{Error, Result};
pub use hyperbolic::{BoundaryPoint, GroupElement, PointH};

/// Crate version, embedded in every CLI artifact.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
