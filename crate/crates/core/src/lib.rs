//! Minimax-optimal support for a null versus alternative hypothesis about a
//! random parameter, computed without estimating the unknown prior.

// `!(x > 0.0)` style checks are how NaN inputs get rejected
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod distributions;
pub mod error;
pub mod family;
pub mod optimize;
pub mod pipeline;
pub mod quadrature;
pub mod support;
pub mod two_groups;
pub mod universal;
pub mod validation;

pub use error::{Error, Result};
