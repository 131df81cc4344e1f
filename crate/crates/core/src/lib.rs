//! Differentiable NFDRS Ignition Component calibrated against the Extremal
//! Dependence Index.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod autodiff;
pub mod cli;
pub mod error;
pub mod eval;
pub mod gradcheck;
pub mod loss;
pub mod data;
pub mod nfdrs;
pub mod params;
pub mod series;
pub mod smoothing;
pub mod trainer;

pub use error::{Error, Result};
