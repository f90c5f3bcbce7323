//! Tennis match forecasting on temporal dominance graphs.

pub mod baselines;
pub mod betting;
pub mod config;
pub mod error;
pub mod eval;
pub mod graphs;
pub mod ingest;
pub mod intransitivity;
pub mod magnet;
pub mod pipeline;
pub mod synthetic;

pub use error::{Error, Result};
