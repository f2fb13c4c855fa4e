//! Desk-scale synthetic data: squiral solution corpora with controlled
//! strategy variation, scripted traces with known expert truth, and the
//! probe trees that group mined features into objectives.

mod corpus;
mod probes;
pub mod rules;
pub mod templates;
mod traces;

pub use corpus::generate_corpus;
pub use probes::{derive_objectives, parse_probes, serialize_probes, standard_probes, ObjectiveProbe};
pub use traces::{
    generate_trace, generate_traces, standard_cohort, to_annotation_doc, PathFiller, TargetPath,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Knobs for the generator. Everything is deterministic in the seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorConfig {
    pub seed: u64,
    pub n_solutions: usize,
    /// Share of solutions using a custom block; the rest are flat.
    pub custom_block_fraction: f64,
    /// Share of custom-block solutions using nested loops; the rest
    /// multiply the count in a single repeat.
    pub nested_loop_fraction: f64,
    /// Share of custom-block solutions carrying one local deviation.
    pub edit_error_rate: f64,
    pub n_traces: usize,
    /// Upper bound on the random part of the gap between snapshots.
    pub timestamp_jitter_s: f64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            seed: 7,
            n_solutions: 20,
            custom_block_fraction: 0.9,
            nested_loop_fraction: 4.0 / 9.0,
            edit_error_rate: 1.0 / 3.0,
            n_traces: 27,
            timestamp_jitter_s: 15.0,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("custom_block_fraction", self.custom_block_fraction),
            ("nested_loop_fraction", self.nested_loop_fraction),
            ("edit_error_rate", self.edit_error_rate),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::validation(format!("{name} {v} outside [0, 1]")));
            }
        }
        if self.n_solutions == 0 {
            return Err(Error::validation("n_solutions must be at least 1"));
        }
        if !self.timestamp_jitter_s.is_finite() || self.timestamp_jitter_s < 0.0 {
            return Err(Error::validation(format!(
                "timestamp_jitter_s {} must be finite and non-negative",
                self.timestamp_jitter_s
            )));
        }
        Ok(())
    }
}
