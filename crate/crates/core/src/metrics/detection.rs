//! First-detection timing: compares when the detector first announced an
//! objective with when the expert first saw it.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::engine::{EventKind, ObjectiveEvent};
use crate::model::annotation::ExpertAnnotation;

/// Outcome of comparing first detection times for one objective.
/// Serialized as the customary short codes so reports and link tables
/// read the same as the written summaries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DetectionType {
    /// Detector and expert first agree at the same snapshot.
    #[serde(rename = "CD")]
    CorrectDetection,
    /// Neither side ever saw the objective.
    #[serde(rename = "CND")]
    CorrectNonDetection,
    /// The detector fired but the expert never saw it.
    #[serde(rename = "ID")]
    IncorrectDetection,
    /// The expert saw it but the detector never fired.
    #[serde(rename = "IND")]
    IncorrectNonDetection,
    /// The detector fired before the expert's first completion.
    #[serde(rename = "E")]
    Early,
    /// The detector fired after the expert's first completion.
    #[serde(rename = "L")]
    Late,
}

impl DetectionType {
    pub const ALL: [DetectionType; 6] = [
        DetectionType::CorrectDetection,
        DetectionType::CorrectNonDetection,
        DetectionType::IncorrectDetection,
        DetectionType::IncorrectNonDetection,
        DetectionType::Early,
        DetectionType::Late,
    ];

    pub fn short(&self) -> &'static str {
        match self {
            DetectionType::CorrectDetection => "CD",
            DetectionType::CorrectNonDetection => "CND",
            DetectionType::IncorrectDetection => "ID",
            DetectionType::IncorrectNonDetection => "IND",
            DetectionType::Early => "E",
            DetectionType::Late => "L",
        }
    }
}

impl fmt::Display for DetectionType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short())
    }
}

/// Classifies one objective from the two first-completion indices.
pub fn classify_detection(
    system_first: Option<u64>,
    expert_first: Option<u64>,
) -> DetectionType {
    match (system_first, expert_first) {
        (None, None) => DetectionType::CorrectNonDetection,
        (Some(_), None) => DetectionType::IncorrectDetection,
        (None, Some(_)) => DetectionType::IncorrectNonDetection,
        (Some(s), Some(e)) if s == e => DetectionType::CorrectDetection,
        (Some(s), Some(e)) if s < e => DetectionType::Early,
        _ => DetectionType::Late,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub student_id: String,
    pub objective_id: u32,
    pub system_first: Option<u64>,
    pub expert_first: Option<u64>,
    pub detection: DetectionType,
}

/// One record per expert objective for one student. The system's first
/// detection is its first `completed` event for the objective.
pub fn detection_records(
    events: &[ObjectiveEvent],
    expert: &ExpertAnnotation,
) -> Vec<DetectionRecord> {
    expert
        .objective_ids
        .iter()
        .map(|&objective_id| {
            let system_first = events
                .iter()
                .find(|e| e.objective_id == objective_id && e.kind == EventKind::Completed)
                .map(|e| e.snapshot_index);
            let expert_first = expert.first_complete(objective_id);
            DetectionRecord {
                student_id: expert.student_id.clone(),
                objective_id,
                system_first,
                expert_first,
                detection: classify_detection(system_first, expert_first),
            }
        })
        .collect()
}

/// Counts per detection type plus the derived correctness fractions.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectionSummary {
    pub cd: u64,
    pub cnd: u64,
    pub id: u64,
    pub ind: u64,
    pub early: u64,
    pub late: u64,
}

impl DetectionSummary {
    pub fn from_counts(cd: u64, cnd: u64, id: u64, ind: u64, early: u64, late: u64) -> Self {
        DetectionSummary { cd, cnd, id, ind, early, late }
    }

    pub fn from_records(records: &[DetectionRecord]) -> Self {
        let mut s = DetectionSummary::default();
        for r in records {
            match r.detection {
                DetectionType::CorrectDetection => s.cd += 1,
                DetectionType::CorrectNonDetection => s.cnd += 1,
                DetectionType::IncorrectDetection => s.id += 1,
                DetectionType::IncorrectNonDetection => s.ind += 1,
                DetectionType::Early => s.early += 1,
                DetectionType::Late => s.late += 1,
            }
        }
        s
    }

    pub fn count(&self, t: DetectionType) -> u64 {
        match t {
            DetectionType::CorrectDetection => self.cd,
            DetectionType::CorrectNonDetection => self.cnd,
            DetectionType::IncorrectDetection => self.id,
            DetectionType::IncorrectNonDetection => self.ind,
            DetectionType::Early => self.early,
            DetectionType::Late => self.late,
        }
    }

    pub fn total(&self) -> u64 {
        self.cd + self.cnd + self.id + self.ind + self.early + self.late
    }

    fn fraction(&self, num: u64) -> Option<f64> {
        let total = self.total();
        if total == 0 {
            None
        } else {
            Some(num as f64 / total as f64)
        }
    }

    /// Detections that disagree with the expert outright.
    pub fn fully_incorrect_fraction(&self) -> Option<f64> {
        self.fraction(self.id + self.ind)
    }

    /// Right outcome, wrong moment.
    pub fn partially_correct_fraction(&self) -> Option<f64> {
        self.fraction(self.early + self.late)
    }

    /// Exact agreement, counting agreed non-detections.
    pub fn strictly_correct_fraction(&self) -> Option<f64> {
        self.fraction(self.cd + self.cnd)
    }
}

/// What happens to accuracy when early and late detections are forgiven.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimingOffsetStats {
    /// Share of expert-confirmed detections that merely missed the moment.
    pub near_miss_rate: Option<f64>,
    pub strict_accuracy: Option<f64>,
    pub lenient_accuracy: Option<f64>,
}

impl TimingOffsetStats {
    pub fn from_summary(s: &DetectionSummary) -> Self {
        let total = s.total();
        let frac = |num: u64, den: u64| {
            if den == 0 {
                None
            } else {
                Some(num as f64 / den as f64)
            }
        };
        TimingOffsetStats {
            near_miss_rate: frac(s.early + s.late, s.cd + s.early + s.late),
            strict_accuracy: frac(s.cd + s.cnd, total),
            lenient_accuracy: frac(s.cd + s.cnd + s.early + s.late, total),
        }
    }
}
