//! Student work traces and solution corpora.
//!
//! A trace is the per-edit snapshot sequence of one student's session.
//! Trace files are line-delimited JSON records; a file may interleave
//! several students. A corpus is a flat set of graded-correct solutions
//! used for mining.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ast::AstNode;

/// One captured program state.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub index: u64,
    /// Seconds since the start of the session. Non-negative, non-decreasing.
    pub timestamp_s: f64,
    pub root: AstNode,
}

/// Ordered snapshots of a single student.
#[derive(Debug, Clone, PartialEq)]
pub struct StudentTrace {
    pub student_id: String,
    pub snapshots: Vec<Snapshot>,
    /// Whether the session ended in a submission. Defaults to true.
    pub submitted: bool,
}

impl StudentTrace {
    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    pub fn start_time(&self) -> f64 {
        self.snapshots.first().map_or(0.0, |s| s.timestamp_s)
    }

    pub fn end_time(&self) -> f64 {
        self.snapshots.last().map_or(0.0, |s| s.timestamp_s)
    }

    /// Timestamp of the snapshot at a given position, if present.
    pub fn timestamp_at(&self, pos: usize) -> Option<f64> {
        self.snapshots.get(pos).map(|s| s.timestamp_s)
    }
}

/// Wire format of one trace record.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceRecord {
    pub student_id: String,
    pub index: u64,
    pub timestamp_s: f64,
    pub ast: AstNode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub submitted: Option<bool>,
}

fn build_trace(student_id: String, mut records: Vec<TraceRecord>) -> Result<StudentTrace> {
    records.sort_by_key(|r| r.index);
    let mut submitted = true;
    let mut snapshots = Vec::with_capacity(records.len());
    let mut prev: Option<(u64, f64)> = None;
    for r in records {
        if let Some((pi, pt)) = prev {
            if r.index == pi {
                return Err(Error::validation(format!(
                    "trace {student_id}: duplicate snapshot index {pi}"
                )));
            }
            if r.timestamp_s < pt {
                return Err(Error::validation(format!(
                    "trace {student_id}: timestamp {} at index {} precedes {}",
                    r.timestamp_s, r.index, pt
                )));
            }
        } else if r.timestamp_s < 0.0 {
            return Err(Error::validation(format!(
                "trace {student_id}: negative timestamp {}",
                r.timestamp_s
            )));
        }
        prev = Some((r.index, r.timestamp_s));
        if let Some(s) = r.submitted {
            submitted = s;
        }
        snapshots.push(Snapshot { index: r.index, timestamp_s: r.timestamp_s, root: r.ast });
    }
    if snapshots.is_empty() {
        return Err(Error::validation(format!("trace {student_id}: no snapshots")));
    }
    Ok(StudentTrace { student_id, snapshots, submitted })
}

/// Parses a line-delimited trace stream into one trace per student.
/// Snapshots are ordered by index; duplicate indices and decreasing
/// timestamps are rejected. Index gaps are accepted.
pub fn parse_traces(text: &str) -> Result<Vec<StudentTrace>> {
    let mut by_student: BTreeMap<String, Vec<TraceRecord>> = BTreeMap::new();
    let mut order: Vec<String> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: TraceRecord = serde_json::from_str(line)
            .map_err(|e| Error::parse(format!("trace line {}: {e}", lineno + 1)))?;
        if !by_student.contains_key(&rec.student_id) {
            order.push(rec.student_id.clone());
        }
        by_student.entry(rec.student_id.clone()).or_default().push(rec);
    }
    if by_student.is_empty() {
        return Err(Error::validation("trace stream contains no records".to_string()));
    }
    order
        .into_iter()
        .map(|id| {
            let records = by_student.remove(&id).expect("student recorded");
            build_trace(id, records)
        })
        .collect()
}

/// Parses a stream that must contain exactly one student.
pub fn parse_trace(text: &str) -> Result<StudentTrace> {
    let mut traces = parse_traces(text)?;
    if traces.len() != 1 {
        return Err(Error::validation(format!(
            "expected a single-student trace, found {} students",
            traces.len()
        )));
    }
    Ok(traces.remove(0))
}

/// Serializes traces back to the line-delimited record format.
pub fn serialize_traces(traces: &[StudentTrace]) -> String {
    let mut out = String::new();
    for t in traces {
        for (i, s) in t.snapshots.iter().enumerate() {
            let rec = TraceRecord {
                student_id: t.student_id.clone(),
                index: s.index,
                timestamp_s: s.timestamp_s,
                ast: s.root.clone(),
                submitted: if i + 1 == t.snapshots.len() { Some(t.submitted) } else { None },
            };
            out.push_str(&serde_json::to_string(&rec).expect("record serialization"));
            out.push('\n');
        }
    }
    out
}

/// Graded-correct reference solutions used for mining.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionCorpus {
    pub solutions: Vec<(String, AstNode)>,
}

impl SolutionCorpus {
    pub fn len(&self) -> usize {
        self.solutions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.solutions.is_empty()
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CorpusEntry {
    solution_id: String,
    ast: AstNode,
}

/// Parses a corpus document (JSON array of {solution_id, ast}).
/// Solution ids must be unique.
pub fn parse_corpus(text: &str) -> Result<SolutionCorpus> {
    let entries: Vec<CorpusEntry> =
        serde_json::from_str(text).map_err(|e| Error::parse(format!("corpus document: {e}")))?;
    let mut seen = std::collections::BTreeSet::new();
    for e in &entries {
        if !seen.insert(e.solution_id.clone()) {
            return Err(Error::validation(format!("duplicate solution id {}", e.solution_id)));
        }
    }
    Ok(SolutionCorpus {
        solutions: entries.into_iter().map(|e| (e.solution_id, e.ast)).collect(),
    })
}

pub fn serialize_corpus(corpus: &SolutionCorpus) -> String {
    let entries: Vec<CorpusEntry> = corpus
        .solutions
        .iter()
        .map(|(id, ast)| CorpusEntry { solution_id: id.clone(), ast: ast.clone() })
        .collect();
    let mut s = serde_json::to_string_pretty(&entries).expect("corpus serialization");
    s.push('\n');
    s
}
