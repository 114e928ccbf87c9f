//! Numerics for checking the matrix-weighted generalization of Costa's
//! entropy power inequality,
//!
//! ```text
//! N(X + A^{1/2} Z) >= |I - A|^{1/n} N(X) + |A|^{1/n} N(X + Z),   N(.) = e^{2h(.)/n}
//! ```
//!
//! for `0 <= A <= I` and Gaussian `Z ~ N(0, Sigma_Z)`. The inequality fails in
//! general for `n >= 2` and holds whenever `A` commutes with `Sigma_Z`.
//!
//! The crate is `no_std` (it needs `alloc`). Everything here is a pure
//! function of its inputs; IO, file formats and the command-line front end
//! live in the `epicheck` crate.
//!
//! Layout:
//!
//! - [`matrix`]: symmetric eigendecomposition, PSD square roots, Loewner
//!   order and commutation predicates, simultaneous diagonalization.
//! - [`gaussian`]: closed-form Gaussian entropy, entropy power, conditional
//!   covariance.
//! - [`epi`]: evaluators for the inequality, the noise-splitting identity,
//!   the three-variable inequality, the perturbation-path AM-GM diagnostic and
//!   the canonical reduction.
//! - [`search`]: seeded Nelder–Mead counterexample search.
//! - [`mc`]: sampling and k-nearest-neighbour entropy estimation for
//!   non-Gaussian `X`.
//! - [`random`]: generators for random PD matrices and instances.

#![cfg_attr(not(test), no_std)]
#![forbid(unsafe_code)]

extern crate alloc;

mod error;
mod math;

pub mod epi;
pub mod fixtures;
pub mod gaussian;
pub mod matrix;
pub mod mc;
pub mod random;
pub mod search;

pub use error::{Error, Result};
pub use matrix::{EigenDecomposition, SymMatrix};

/// Default relative tolerance for every boolean matrix predicate.
pub const DEFAULT_TOL: f64 = 1e-9;

/// Band below zero in which eigenvalues are clamped before taking square roots.
pub const SQRT_CLAMP_TOL: f64 = 1e-10;

/// `ln(2 pi e)`.
pub const LN_2PI_E: f64 = 2.837_877_066_409_345_5;

/// `2 pi e`.
pub const TWO_PI_E: f64 = 17.079_468_445_347_132;
