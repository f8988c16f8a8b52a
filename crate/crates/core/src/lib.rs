//! Long-range non-line-of-sight ultraviolet link toolkit: Monte Carlo channel
//! impulse responses, photon-counting detection, OOK error rates and pulse
//! position estimation.

// `!(x < y)` is how the validators reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod atmosphere;
pub mod channel;
pub mod cli;
pub mod config;
pub mod detection;
pub mod error;
pub mod localization;
pub mod poisson;
pub mod seeding;
pub mod signal;
pub mod vec3;

pub use error::{Error, Result};
