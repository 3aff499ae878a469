//! Three-level open quantum system thermalization toolkit.
//!
//! The crate models a Λ-type atom (excited state `e`, ground states `g1`,
//! `g2`) coupled to a bosonic heat bath and provides:
//!
//! - [`model`]: parameters, validation, thermal occupations, state types.
//! - [`generator`]: the 9×9 Lindblad superoperator and the optical Bloch
//!   matrix, both transcribed entry by entry and derived by conjugation.
//! - [`dynamics`]: RK4, adaptive Dormand–Prince and matrix-exponential
//!   propagation plus spectral extraction of asymptotic states.
//! - [`analysis`]: Gibbs populations, von Neumann entropy, the two
//!   zero-temperature/zero-splitting limit orders, entropy surfaces and
//!   the closed-form anti-thermalization steady state.
//! - [`micro`]: an exact single-excitation simulation of the atom coupled
//!   to a discretized zero-temperature bath.
//!
//! Basis order is `(e, g1, g2)` everywhere. Density matrices are vectorized
//! column-major: `vec(ρ)[i + 3 j] = ρ[i, j]`.

// `!(x > 0.0)` deliberately rejects NaN alongside non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod dynamics;
pub mod generator;
pub mod linalg;
pub mod micro;
pub mod model;
pub mod sample;

pub use num_complex::Complex64;

/// Version string embedded in emitted artifacts.
pub const VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));
