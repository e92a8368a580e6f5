#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod basis;
pub mod cli;
pub mod driver;
pub mod error;
pub mod mesh;
pub mod nlp;
pub mod ocp_model;
pub mod problems;
pub mod quadrature;
pub mod transcription;

pub use error::{Error, Result};
