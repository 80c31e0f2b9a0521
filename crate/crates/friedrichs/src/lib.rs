//! Numerical laboratory for multichannel decay in the Lee-Friedrichs model.
//!
//! A set of discrete levels couples to continuum channels through a
//! positive-semidefinite spectral density matrix `omega(lambda)`. The crate
//! computes the resulting spectral correlation kernel `alpha(t)` and its
//! Laplace transforms on both Riemann sheets, locates second-sheet resonance
//! poles of the reduced resolvent, builds their left/right-eigenvector
//! projectors and residues, solves the exact memory-kernel master equation,
//! and checks everything against an exactly diagonalized discretized
//! continuum. The analysis layer quantifies how far the reduced evolution is
//! from a semigroup and how that deviation dies as the coupling is flattened
//! toward the Markovian limit.
//!
//! Module map:
//! - [`model`]: model definition (levels, channels, spectral density) and
//!   validation.
//! - [`kernel`]: `alpha(t)`, first-sheet `alpha(z)`, second-sheet
//!   continuation.
//! - [`resolvent`]: `h(z)`, `W^II(z)`, pole search, projectors, residues,
//!   pole-sum propagator, background contour term.
//! - [`evolution`]: Volterra memory-kernel solver and the constant-generator
//!   Markovian semigroup.
//! - [`oracle`]: discretized-continuum Hamiltonian, exact reduced propagator,
//!   dispersion.
//! - [`analysis`]: semigroup deviation, cross-pole orthogonality, decay-rate
//!   fits, Markovianity metrics.
//! - [`verify`]: the end-to-end verification suite used by the test target
//!   and the CLI `check` subcommand.

pub mod analysis;
pub mod error;
pub mod evolution;
pub mod kernel;
pub mod linalg;
pub mod model;
pub mod oracle;
pub mod quad;
pub mod report;
pub mod resolvent;
pub mod rng;
pub mod verify;

pub use error::Error;

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;
/// Dense complex matrix (dynamically sized; N is small).
pub type CMat = nalgebra::DMatrix<C64>;
/// Dense complex column vector.
pub type CVec = nalgebra::DVector<C64>;

/// Crate-wide result type.
pub type Result<T> = std::result::Result<T, Error>;

/// Imaginary unit.
pub const I: C64 = C64::new(0.0, 1.0);

/// Library version, recorded in exported run metadata.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
