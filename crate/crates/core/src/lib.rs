//! Forward modelling and Bayesian estimation of ground thermal properties and a
//! time-varying surface heat transfer coefficient from buried temperature sensors.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod config;
pub mod diagnostics;
pub mod domain;
pub mod error;
pub mod forward;
pub mod inference;
pub mod io;
pub mod pipeline;
pub mod sensitivity;
pub mod synthetic;

pub use error::{Error, Result};
