//! Spectral diagnostics for one-frequency quasiperiodic Schrödinger operators
//!
//! ```text
//! (H u)_n = u_{n+1} + u_{n-1} + v(theta + n alpha) u_n
//! ```
//!
//! with real-analytic `v`. The crate computes transfer-matrix cocycles,
//! half-line and whole-line Weyl functions, subordinacy profiles, local
//! Hölder exponents of spectral measures, the integrated density of states,
//! and the conjugations used to reduce analytic cocycles to
//! Schrödinger form.

// `!(x > 0.0)` rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod arithmetic;
pub mod cocycle;
pub mod conjugation;
pub mod error;
pub mod fit;
pub mod io;
pub mod linalg;
pub mod potential;
pub mod spectral;
pub mod subordinacy;
pub mod weyl;

pub use error::{Error, Result};
