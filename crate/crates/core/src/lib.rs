//! Phase-space transport and non-stationary deformation quantization for
//! linear (possibly dissipative) ODE systems.
//!
//! The crate is organised bottom-up:
//!
//! * [`linsys`] — linear systems `ẋ = A(t)x + J(t)`, fundamental matrices and
//!   classical flows,
//! * [`symplectic`] — time-dependent symplectic structures `Ω(t)` carried
//!   along a flow, Poisson brackets and the quadratic action functional,
//! * [`symbols`] — the exact Gaussian-polynomial symbol class together with
//!   its star-product, moment and trace calculus,
//! * [`states`] — Wigner eigenstates of harmonic and magnetic-type models,
//! * [`evolution`] — state transport, expectation values and the extended
//!   time derivative that makes the star algebra compatible with a
//!   non-stationary `Ω(t)`,
//! * [`models`] — ready-made model definitions (damped oscillator, reduced
//!   charge-in-magnetic-field system, generic linear systems),
//! * [`verify`] — machine-checkable invariant suites used by the CLI.

// Input validation writes `!(x > 0.0)` instead of `x <= 0.0` on purpose: the
// negated form also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod evolution;
pub mod linsys;
pub mod models;
pub mod states;
pub mod symbols;
pub mod symplectic;
pub mod verify;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
