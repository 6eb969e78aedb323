//! Streaming decision trees and forests with prequential evaluation.
//!
//! The crate is organised around four layers:
//!
//! * [`types`] — schemas, instances, predictions, run configuration.
//! * [`hoeffding`] — single incremental trees (classification and regression).
//! * [`forest`] — feature-bagged ensembles, the hybrid controller, drift detection.
//! * [`streams`] / [`eval`] — data sources and test-then-train evaluation.

pub mod eval;
pub mod forest;
pub mod hoeffding;
pub mod streams;
pub mod types;

pub use types::{
    FeatureKind, FeatureSpec, FeatureValue, Instance, Prediction, RunConfig, Schema, Target, Task,
    ValidateError,
};
