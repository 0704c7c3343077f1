//! Coalescence hidden-variable fractal interpolation functions.
//!
//! The crate builds the iterated function systems, evaluates their fixed
//! points on N-adic grids, computes exact L2 inner products through the
//! self-similarity of the attractor, and assembles orthogonal scaling
//! functions, wavelets and a multilevel filter bank on top of them.

// Checks are written as `!(x < bound)` so that NaN fails them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod basis;
pub mod constraints;
pub mod error;
pub mod eval;
pub mod expr;
pub mod ifs;
pub mod inner;
pub mod mra;
pub mod piecewise;
pub mod presets;
pub mod report;
pub mod space;
pub mod transform;
pub mod wavelet;

pub use error::{Error, Result};
