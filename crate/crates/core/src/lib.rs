//! Simulation and verification toolkit for stochastic volatility models with
//! long-memory Gaussian volatility and heavy-tailed noise.

// `!(x > 0.0)` rejects NaN along with nonpositive values; index loops mirror
// the formulas.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod asymptotics;
pub mod budget;
pub mod error;
pub mod estimators;
pub mod gaussian_lm;
pub mod io;
pub mod par;
pub mod quadrature;
pub mod reference_laws;
pub mod rng;
pub mod special;
pub mod stable;
pub mod stats;
pub mod sv_model;
pub mod tail_laws;
pub mod verify;

pub use error::{Error, Result};
