//! Objective detection: replays mined features over a student trace and
//! emits completion events.
//!
//! Each learning objective names the features that must all be present
//! for it to count as complete. Replay walks the snapshots in order and
//! tracks a small status machine per objective: inactive until first
//! satisfied, then complete, broken when satisfaction is lost, complete
//! again when regained.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mining::FeatureCluster;
use crate::model::trace::StudentTrace;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveSpec {
    pub id: u32,
    pub label: String,
    /// Feature ids (1-based, into the features document) that must all
    /// be present.
    #[serde(rename = "required")]
    pub required_features: Vec<u32>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ObjectivesDoc {
    objectives: Vec<ObjectiveSpec>,
}

/// Parses the objectives document and checks ids are contiguous from 1
/// and every objective requires at least one feature.
pub fn parse_objectives(input: &str) -> Result<Vec<ObjectiveSpec>> {
    let doc: ObjectivesDoc =
        serde_json::from_str(input).map_err(|e| Error::parse(format!("objectives doc: {e}")))?;
    validate_objectives(&doc.objectives)?;
    Ok(doc.objectives)
}

pub fn validate_objectives(objectives: &[ObjectiveSpec]) -> Result<()> {
    if objectives.is_empty() {
        return Err(Error::validation("at least one objective is required"));
    }
    for (i, o) in objectives.iter().enumerate() {
        if o.id != (i + 1) as u32 {
            return Err(Error::validation(format!(
                "objective ids must be contiguous from 1; found {} at position {}",
                o.id,
                i + 1
            )));
        }
        if o.required_features.is_empty() {
            return Err(Error::validation(format!("objective {} requires no features", o.id)));
        }
    }
    Ok(())
}

pub fn serialize_objectives(objectives: &[ObjectiveSpec]) -> String {
    let doc = ObjectivesDoc { objectives: objectives.to_vec() };
    let mut s = serde_json::to_string_pretty(&doc).expect("objectives serialize");
    s.push('\n');
    s
}

/// Presence bits for all features at one snapshot, in feature id order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureState(pub Vec<bool>);

impl fmt::Display for FeatureState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveStatus {
    Inactive,
    Complete,
    Broken,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Completed,
    Broken,
    Recompleted,
}

impl EventKind {
    /// Completed and recompleted both mark the objective as satisfied.
    pub fn is_completion(self) -> bool {
        matches!(self, EventKind::Completed | EventKind::Recompleted)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveEvent {
    pub student_id: String,
    pub snapshot_index: u64,
    pub objective_id: u32,
    pub kind: EventKind,
}

#[derive(Debug, Clone)]
pub struct ReplayOutput {
    pub events: Vec<ObjectiveEvent>,
    /// Feature presence per snapshot.
    pub feature_states: Vec<FeatureState>,
    /// Status of every objective at every snapshot, `[snapshot][objective]`.
    pub statuses: Vec<Vec<ObjectiveStatus>>,
}

impl ReplayOutput {
    /// Objectives with Complete status at the given snapshot position.
    pub fn complete_set_at(&self, position: usize) -> BTreeSet<u32> {
        self.statuses[position]
            .iter()
            .enumerate()
            .filter(|(_, s)| **s == ObjectiveStatus::Complete)
            .map(|(i, _)| (i + 1) as u32)
            .collect()
    }

    pub fn final_statuses(&self) -> &[ObjectiveStatus] {
        self.statuses.last().map(Vec::as_slice).unwrap_or(&[])
    }

    /// Snapshot index of the first completed event per objective.
    pub fn first_completed(&self, objective_id: u32) -> Option<u64> {
        self.events
            .iter()
            .find(|e| e.objective_id == objective_id && e.kind == EventKind::Completed)
            .map(|e| e.snapshot_index)
    }
}

/// Replays the trace snapshot by snapshot. Events are emitted in snapshot
/// order; within a snapshot, in objective id order.
pub fn replay(
    trace: &StudentTrace,
    features: &[FeatureCluster],
    objectives: &[ObjectiveSpec],
) -> Result<ReplayOutput> {
    validate_objectives(objectives)?;
    if features.is_empty() {
        return Err(Error::validation("replay requires at least one feature"));
    }
    for o in objectives {
        for &f in &o.required_features {
            if f == 0 || f as usize > features.len() {
                return Err(Error::validation(format!(
                    "objective {} references unknown feature {f} (have 1..={})",
                    o.id,
                    features.len()
                )));
            }
        }
    }

    let mut events = Vec::new();
    let mut feature_states = Vec::with_capacity(trace.snapshots.len());
    let mut statuses = Vec::with_capacity(trace.snapshots.len());
    let mut current: Vec<ObjectiveStatus> = vec![ObjectiveStatus::Inactive; objectives.len()];

    for snap in &trace.snapshots {
        let bits: Vec<bool> = features.iter().map(|f| f.present_in(&snap.root)).collect();
        for (pos, o) in objectives.iter().enumerate() {
            let satisfied = o.required_features.iter().all(|&f| bits[f as usize - 1]);
            let kind = match (current[pos], satisfied) {
                (ObjectiveStatus::Inactive, true) => Some(EventKind::Completed),
                (ObjectiveStatus::Complete, false) => Some(EventKind::Broken),
                (ObjectiveStatus::Broken, true) => Some(EventKind::Recompleted),
                _ => None,
            };
            if let Some(kind) = kind {
                current[pos] = match kind {
                    EventKind::Broken => ObjectiveStatus::Broken,
                    _ => ObjectiveStatus::Complete,
                };
                events.push(ObjectiveEvent {
                    student_id: trace.student_id.clone(),
                    snapshot_index: snap.index,
                    objective_id: o.id,
                    kind,
                });
            }
        }
        feature_states.push(FeatureState(bits));
        statuses.push(current.clone());
    }
    Ok(ReplayOutput { events, feature_states, statuses })
}

/// One JSON object per line, in event order.
pub fn serialize_events(events: &[ObjectiveEvent]) -> String {
    let mut out = String::new();
    for e in events {
        out.push_str(&serde_json::to_string(e).expect("event serializes"));
        out.push('\n');
    }
    out
}

pub fn parse_events(input: &str) -> Result<Vec<ObjectiveEvent>> {
    input
        .lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, line)| {
            serde_json::from_str(line)
                .map_err(|e| Error::parse(format!("event log line {}: {e}", i + 1)))
        })
        .collect()
}
