//! Tags detector events against the expert timeline.
//!
//! Completion events (completed or recompleted) are true positives when
//! the expert marks the objective complete anywhere within the snapshot
//! tolerance. Broken events are compared at their exact snapshot: a
//! break while the expert also sees the objective incomplete is a true
//! negative. Expert completions the detector never announced within the
//! tolerance are counted as extra false negatives. Stretches where both
//! sides quietly agree the objective is incomplete produce nothing.

use serde::{Deserialize, Serialize};

use crate::engine::ObjectiveEvent;
use crate::error::{Error, Result};
use crate::model::annotation::ExpertAnnotation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventTag {
    TruePositive,
    FalsePositive,
    TrueNegative,
    FalseNegative,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaggedEvent {
    pub event: ObjectiveEvent,
    pub tag: EventTag,
}

/// An expert completion with no matching detector event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissedCompletion {
    pub objective_id: u32,
    pub snapshot_index: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn new(tp: u64, fp: u64, tn: u64, fn_: u64) -> Self {
        ConfusionCounts { tp, fp, tn, fn_ }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn rates(&self) -> RateMetrics {
        let div = |num: u64, den: u64| {
            if den == 0 {
                None
            } else {
                Some(num as f64 / den as f64)
            }
        };
        let precision = div(self.tp, self.tp + self.fp);
        let recall = div(self.tp, self.tp + self.fn_);
        let f1 = match (precision, recall) {
            (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
            _ => None,
        };
        RateMetrics {
            accuracy: div(self.tp + self.tn, self.total()),
            precision,
            recall,
            true_negative_rate: div(self.tn, self.tn + self.fp),
            false_positive_rate: div(self.fp, self.fp + self.tn),
            false_negative_rate: div(self.fn_, self.fn_ + self.tp),
            f1,
        }
    }
}

/// Each rate is absent when its denominator is empty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateMetrics {
    pub accuracy: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub true_negative_rate: Option<f64>,
    pub false_positive_rate: Option<f64>,
    pub false_negative_rate: Option<f64>,
    pub f1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TagOutcome {
    pub tagged: Vec<TaggedEvent>,
    pub missed: Vec<MissedCompletion>,
    pub counts: ConfusionCounts,
}

/// Tags one student's events. `tolerance` is in snapshots and applies to
/// completion events and missed-completion checks only; break events are
/// judged at their own snapshot.
pub fn tag_events(
    events: &[ObjectiveEvent],
    expert: &ExpertAnnotation,
    tolerance: i64,
) -> Result<TagOutcome> {
    if tolerance < 0 {
        return Err(Error::validation("tolerance must be non-negative"));
    }
    let n = expert.n_snapshots() as i64;
    let mut tagged = Vec::with_capacity(events.len());
    let mut counts = ConfusionCounts::default();

    for event in events {
        if !expert.objective_ids.contains(&event.objective_id) {
            return Err(Error::validation(format!(
                "no expert column for objective {}",
                event.objective_id
            )));
        }
        let at = event.snapshot_index as i64;
        if at >= n {
            return Err(Error::validation(format!(
                "event at snapshot {at} but the annotation covers {n}"
            )));
        }
        let tag = if event.kind.is_completion() {
            let lo = (at - tolerance).max(0) as usize;
            let hi = ((at + tolerance).min(n - 1)) as usize;
            if (lo..=hi).any(|s| expert.truth(s, event.objective_id)) {
                EventTag::TruePositive
            } else {
                EventTag::FalsePositive
            }
        } else if !expert.truth(at as usize, event.objective_id) {
            EventTag::TrueNegative
        } else {
            EventTag::FalseNegative
        };
        match tag {
            EventTag::TruePositive => counts.tp += 1,
            EventTag::FalsePositive => counts.fp += 1,
            EventTag::TrueNegative => counts.tn += 1,
            EventTag::FalseNegative => counts.fn_ += 1,
        }
        tagged.push(TaggedEvent { event: event.clone(), tag });
    }

    let mut missed = Vec::new();
    for &objective_id in &expert.objective_ids {
        for edge in expert.rising_edges(objective_id) {
            let e = edge as i64;
            let hit = events.iter().any(|ev| {
                ev.objective_id == objective_id
                    && ev.kind.is_completion()
                    && (ev.snapshot_index as i64 - e).abs() <= tolerance
            });
            if !hit {
                counts.fn_ += 1;
                missed.push(MissedCompletion { objective_id, snapshot_index: edge });
            }
        }
    }
    Ok(TagOutcome { tagged, missed, counts })
}
