#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod angmom;
pub mod crystal;
pub mod digest;
pub mod dynamics;
pub mod error;
pub mod identify;
pub mod molecule;
pub mod readout;
pub mod units;

pub use error::{Error, Result};
