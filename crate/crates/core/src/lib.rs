//! Fairness-aware evaluation and protocol-compliant partitioning for facial
//! affect datasets (expression recognition, action unit detection and
//! valence-arousal estimation).

// `!(x > 0.0)` style checks deliberately reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data_model;
pub mod error;
pub mod harness;
pub mod ingest;
pub mod metrics;
pub mod partition;
pub mod report;

pub use error::{Error, Result};
