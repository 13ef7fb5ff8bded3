//! Numerical verification of Carleman estimates and conditional stability
//! for coupled semilinear parabolic systems.

// `!(x > 0.0)` also rejects NaN; index loops mirror the stencils.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod banded;
pub mod carleman;
pub mod csvio;
pub mod discretize;
pub mod error;
pub mod forward;
pub mod model;
pub mod reconstruct;
pub mod runner;
pub mod stability;

pub use error::{Error, Result};
