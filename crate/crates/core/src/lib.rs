//! Echo State Networks with cluster-based input weight initialization.
//!
//! The crate implements the full pipeline for sequence classification with
//! reservoir computing: sparse random weight generation, leaky state
//! updates, ridge-regression readout training via mergeable accumulators,
//! mini-batch K-Means for centroid-based input weights (KM-ESN), staged and
//! joint hyper-parameter search with cross validation, and dataset
//! ingestion with the standard preprocessing and error metrics.

pub mod clustering;
pub mod data;
pub mod error;
pub mod hyperopt;
pub mod km_init;
pub mod linalg;
pub mod reservoir;
pub mod seed;

pub use error::{Error, Result};
