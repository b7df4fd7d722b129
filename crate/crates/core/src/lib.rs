// `!(x > 0.0)` is used on purpose so NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Structural VAR machinery for the global crude-oil market and regional
//! employment, plus the multisector input-output model of how oil-price
//! changes propagate to sectoral employment.

pub mod bootstrap;
pub mod date;
pub mod dynamics;
pub mod error;
pub mod identify;
pub mod ingest;
pub mod linalg;
pub mod network;
pub mod sim;
pub mod var;
pub mod wages;

pub use error::{Error, Result};
