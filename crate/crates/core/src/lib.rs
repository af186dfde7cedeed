//! Benchmarking toolkit for two-party therapy dialogue corpora.

// Parameter checks are written as `!(x > 0.0)` on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod embed;
pub mod error;
pub mod fidelity;
pub mod lexical;
pub mod lm;
pub mod pe;
pub mod report;
pub mod server;
pub mod simulator;
pub mod stats;
pub mod structural;
pub mod transcript;

pub use error::{Error, Result};
