// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod basis;
pub mod bench;
pub mod cli;
pub mod domain;
pub mod error;
pub mod linalg;
pub mod nn;
pub mod projection;

pub use error::{Error, Result};
