#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bayes;
pub mod capital;
pub mod cli_io;
pub mod distributions;
pub mod error;
pub mod estimators;
pub mod experiments;
pub mod mc_engine;
pub mod rng;

pub use error::{Error, ErrorClass, Result};
pub use rng::RngStream;
