// Validation uses `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod aqt;
pub mod error;
pub mod experiments;
pub mod phc;
pub mod rthfa;
pub mod sim;
pub mod simml;

pub use error::{Error, Result};
