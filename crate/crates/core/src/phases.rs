//! Splits an attempt into three phases around the detector's events:
//! A up to the last first-time completion, B while previously detected
//! objectives churn (break or come back), C the quiet tail. Each phase
//! gets an active/idle time budget, where idleness means a long gap
//! between consecutive snapshots.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::engine::{EventKind, ObjectiveEvent};
use crate::error::{Error, Result};
use crate::metrics::{DetectionRecord, DetectionType};
use crate::model::trace::StudentTrace;

pub const DEFAULT_IDLE_GAP_S: f64 = 180.0;

/// Timestamps bounding the phases. A gap between snapshots belongs to
/// the phase containing the gap's start, so with half-open intervals
/// `[start, a_end)`, `[a_end, b_end)`, `[b_end, ...)` the phases tile
/// the trace exactly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseBoundaries {
    pub start: f64,
    pub a_end: f64,
    pub b_end: f64,
    pub trace_end: f64,
    /// No completion ever fired; the whole attempt counts as phase A.
    pub whole_trace_a: bool,
    pub empty_b: bool,
    pub empty_c: bool,
}

impl PhaseBoundaries {
    pub fn width_a(&self) -> f64 {
        self.a_end - self.start
    }
    pub fn width_b(&self) -> f64 {
        self.b_end - self.a_end
    }
    pub fn width_c(&self) -> f64 {
        self.trace_end - self.b_end
    }
}

/// Finds the phase boundaries for one student. Completion events mark
/// phase A; broken and recompleted events after the last completion mark
/// phase B. A trace with no completions at all is wholly phase A.
pub fn segment_phases(trace: &StudentTrace, events: &[ObjectiveEvent]) -> Result<PhaseBoundaries> {
    if trace.is_empty() {
        return Err(Error::validation("cannot segment an empty trace"));
    }
    let clock: BTreeMap<u64, f64> =
        trace.snapshots.iter().map(|s| (s.index, s.timestamp_s)).collect();
    let ts_of = |event: &ObjectiveEvent| -> Result<f64> {
        clock.get(&event.snapshot_index).copied().ok_or_else(|| {
            Error::validation(format!(
                "event at snapshot {} not present in the trace of {:?}",
                event.snapshot_index, trace.student_id
            ))
        })
    };

    let start = trace.start_time();
    let trace_end = trace.end_time();

    let mut a_end: Option<f64> = None;
    for event in events.iter().filter(|e| e.kind == EventKind::Completed) {
        let t = ts_of(event)?;
        a_end = Some(a_end.map_or(t, |cur: f64| cur.max(t)));
    }
    let (a_end, whole_trace_a) = match a_end {
        Some(t) => (t, false),
        None => (trace_end, true),
    };

    let mut b_end = a_end;
    if !whole_trace_a {
        for event in events
            .iter()
            .filter(|e| matches!(e.kind, EventKind::Broken | EventKind::Recompleted))
        {
            let t = ts_of(event)?;
            if t > a_end {
                b_end = b_end.max(t);
            }
        }
    }

    Ok(PhaseBoundaries {
        start,
        a_end,
        b_end,
        trace_end,
        whole_trace_a,
        empty_b: b_end == a_end,
        empty_c: trace_end == b_end,
    })
}

/// Sums the inter-snapshot gaps whose start lies in `[lo, hi)`, split by
/// whether the gap exceeds the idle threshold.
pub fn active_idle(
    trace: &StudentTrace,
    lo: f64,
    hi: f64,
    threshold_s: f64,
) -> (f64, f64) {
    let mut active = 0.0;
    let mut idle = 0.0;
    for pair in trace.snapshots.windows(2) {
        let gap_start = pair[0].timestamp_s;
        if gap_start < lo || gap_start >= hi {
            continue;
        }
        let gap = pair[1].timestamp_s - pair[0].timestamp_s;
        if gap > threshold_s {
            idle += gap;
        } else {
            active += gap;
        }
    }
    (active, idle)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseBudget {
    pub active_seconds: f64,
    pub idle_seconds: f64,
}

impl PhaseBudget {
    pub fn total(&self) -> f64 {
        self.active_seconds + self.idle_seconds
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeBudget {
    pub idle_gap_threshold_s: f64,
    pub a: PhaseBudget,
    pub b: PhaseBudget,
    pub c: PhaseBudget,
}

pub fn time_budget(
    trace: &StudentTrace,
    bounds: &PhaseBoundaries,
    threshold_s: f64,
) -> TimeBudget {
    let budget = |lo: f64, hi: f64| {
        let (active_seconds, idle_seconds) = active_idle(trace, lo, hi, threshold_s);
        PhaseBudget { active_seconds, idle_seconds }
    };
    TimeBudget {
        idle_gap_threshold_s: threshold_s,
        a: budget(bounds.start, bounds.a_end),
        b: budget(bounds.a_end, bounds.b_end),
        c: budget(bounds.b_end, f64::INFINITY),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PhaseConfig {
    pub idle_gap_threshold_s: f64,
}

impl Default for PhaseConfig {
    fn default() -> Self {
        PhaseConfig { idle_gap_threshold_s: DEFAULT_IDLE_GAP_S }
    }
}

/// One student's phase row: boundaries, budgets, and the share of each
/// first-detection outcome over their objectives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudentPhaseRow {
    pub student_id: String,
    pub boundaries: PhaseBoundaries,
    pub budget: TimeBudget,
    pub correct_ratio: f64,
    pub incorrect_ratio: f64,
    pub early_ratio: f64,
    pub late_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseReport {
    pub rows: Vec<StudentPhaseRow>,
}

/// Builds the per-student phase rows. Events and records are filtered by
/// student id; every trace must have at least one detection record.
pub fn phase_report(
    traces: &[StudentTrace],
    events: &[ObjectiveEvent],
    records: &[DetectionRecord],
    config: &PhaseConfig,
) -> Result<PhaseReport> {
    let mut rows = Vec::with_capacity(traces.len());
    for trace in traces {
        let id = &trace.student_id;
        let own_events: Vec<ObjectiveEvent> = events
            .iter()
            .filter(|e| e.student_id == *id)
            .cloned()
            .collect();
        let own_records: Vec<&DetectionRecord> =
            records.iter().filter(|r| r.student_id == *id).collect();
        if own_records.is_empty() {
            return Err(Error::validation(format!(
                "no detection records for student {id:?}"
            )));
        }
        let boundaries = segment_phases(trace, &own_events)?;
        let budget = time_budget(trace, &boundaries, config.idle_gap_threshold_s);
        let n = own_records.len() as f64;
        let share = |kinds: &[DetectionType]| {
            own_records.iter().filter(|r| kinds.contains(&r.detection)).count() as f64 / n
        };
        rows.push(StudentPhaseRow {
            student_id: id.clone(),
            boundaries,
            budget,
            correct_ratio: share(&[
                DetectionType::CorrectDetection,
                DetectionType::CorrectNonDetection,
            ]),
            incorrect_ratio: share(&[
                DetectionType::IncorrectDetection,
                DetectionType::IncorrectNonDetection,
            ]),
            early_ratio: share(&[DetectionType::Early]),
            late_ratio: share(&[DetectionType::Late]),
        });
    }
    Ok(PhaseReport { rows })
}

/// Per-student phase table as CSV.
pub fn report_csv(report: &PhaseReport) -> String {
    let mut out = String::from(
        "student_id,a_seconds,b_seconds,c_seconds,whole_trace_a,\
         a_active_s,a_idle_s,b_active_s,b_idle_s,c_active_s,c_idle_s,\
         correct_ratio,incorrect_ratio,early_ratio,late_ratio\n",
    );
    for row in &report.rows {
        out.push_str(&format!(
            "{},{:.1},{:.1},{:.1},{},{:.1},{:.1},{:.1},{:.1},{:.1},{:.1},{:.4},{:.4},{:.4},{:.4}\n",
            row.student_id,
            row.boundaries.width_a(),
            row.boundaries.width_b(),
            row.boundaries.width_c(),
            row.boundaries.whole_trace_a,
            row.budget.a.active_seconds,
            row.budget.a.idle_seconds,
            row.budget.b.active_seconds,
            row.budget.b.idle_seconds,
            row.budget.c.active_seconds,
            row.budget.c.idle_seconds,
            row.correct_ratio,
            row.incorrect_ratio,
            row.early_ratio,
            row.late_ratio,
        ));
    }
    out
}

/// The three scatter datasets for external plotting, as (name, csv) pairs:
/// correct-detection share against phase-A active time, early share
/// against phase-A idle time, and all shares against phase-B/C budgets.
pub fn scatter_datasets(report: &PhaseReport) -> Vec<(String, String)> {
    let mut correct_active = String::from("student_id,correct_ratio,a_active_s\n");
    let mut early_idle = String::from("student_id,early_ratio,a_idle_s\n");
    let mut ratios_bc = String::from(
        "student_id,correct_ratio,incorrect_ratio,early_ratio,late_ratio,\
         b_active_s,b_idle_s,c_active_s,c_idle_s\n",
    );
    for row in &report.rows {
        correct_active.push_str(&format!(
            "{},{:.4},{:.1}\n",
            row.student_id, row.correct_ratio, row.budget.a.active_seconds
        ));
        early_idle.push_str(&format!(
            "{},{:.4},{:.1}\n",
            row.student_id, row.early_ratio, row.budget.a.idle_seconds
        ));
        ratios_bc.push_str(&format!(
            "{},{:.4},{:.4},{:.4},{:.4},{:.1},{:.1},{:.1},{:.1}\n",
            row.student_id,
            row.correct_ratio,
            row.incorrect_ratio,
            row.early_ratio,
            row.late_ratio,
            row.budget.b.active_seconds,
            row.budget.b.idle_seconds,
            row.budget.c.active_seconds,
            row.budget.c.idle_seconds,
        ));
    }
    vec![
        ("phase_a_correct_vs_active".to_string(), correct_active),
        ("phase_a_early_vs_idle".to_string(), early_idle),
        ("phase_a_ratios_vs_bc_time".to_string(), ratios_bc),
    ]
}
