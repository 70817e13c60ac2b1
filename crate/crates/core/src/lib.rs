//! Second-order drive susceptibility of a driven spin-1/2 in a fluctuating bath.
//!
//! The crate is `no_std` (with `alloc`). It contains the closed-form coefficients
//! ([`model`]), a Bloch-equation integrator ([`bloch`]), pulse sequences and
//! refocused-nutation simulation ([`sequence`]), brute-force cross-checks
//! ([`oracle`]) and the decay/parabola fitting pipeline ([`fit`]).
#![no_std]
// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod bloch;
pub mod error;
pub mod fit;
pub mod linalg;
pub mod model;
pub mod oracle;
pub mod quadrature;
pub mod sequence;
pub mod stats;

pub use error::{Error, Result};
pub use model::{
    compute_coefficients, compute_gamma, BathSpec, ComplexLorentzian, DriveCoefficients,
    SpinSystemParams,
};
