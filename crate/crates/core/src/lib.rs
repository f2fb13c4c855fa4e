//! feedmine: mines structural code features from solution corpora,
//! replays them over student editing traces to detect learning-objective
//! completion, and evaluates the detections against expert annotations.

pub mod engine;
pub mod error;
pub mod graph;
pub mod metrics;
pub mod mining;
pub mod model;
pub mod phases;
pub mod pipeline;
pub mod synth;

pub use error::{Error, Result};
