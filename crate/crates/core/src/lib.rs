//! Lossless convexification of matrix-inequality programs with numerical
//! strong-duality certificates.

// NaN must fail these comparisons, so `!(x > 0.0)` is intentional.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
pub mod bmi;
pub mod cert;
pub mod cli;
pub mod control;
pub mod convexify;
pub mod corpus;
pub mod error;
pub mod sdp;
pub mod symmat;

pub use error::{Error, Result};
