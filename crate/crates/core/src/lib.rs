//! Continuous-time central bank model: a structural short-rate and inflation
//! model with closed-form pricers, a discrete DSGE counterpart, a Monte Carlo
//! engine and a market calibration.

// Negated comparisons such as `!(x > 0.0)` are used on purpose so that NaN
// inputs fail validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibration;
pub mod ctcb;
pub mod dsge;
pub mod error;
pub mod inflation;
pub mod ir_pricing;
pub mod market_data;
pub mod math;
pub mod moment_match;
pub mod monte_carlo;
pub mod scenarios;
pub mod step;

pub use error::{Error, Result};
