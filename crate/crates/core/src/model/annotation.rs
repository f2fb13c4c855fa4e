//! Expert ground-truth annotations.
//!
//! Experts record, per student and objective, from which snapshot the
//! objective is genuinely complete (or the intervals where it is, when it
//! was broken in between), plus the final outcome of the submission and
//! optional observed impact labels. Annotations expand into a boolean
//! truth matrix indexed by snapshot position and objective.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Outcome of the submitted program as judged by the expert.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FinalOutcome {
    #[serde(rename = "working")]
    Working,
    #[serde(rename = "non_working")]
    NonWorking,
}

/// Observed impact of inaccurate feedback on student behaviour.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ImpactType {
    /// Incorrect perception of buggy code.
    #[serde(rename = "IPB")]
    Ipb,
    /// Ignoring the system: working on despite all-green or missing feedback.
    #[serde(rename = "ITS")]
    Its,
    /// Early submission on all-green feedback.
    #[serde(rename = "ES")]
    Es,
}

impl fmt::Display for ImpactType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ImpactType::Ipb => "IPB",
            ImpactType::Its => "ITS",
            ImpactType::Es => "ES",
        };
        f.write_str(s)
    }
}

/// Per-objective completion truth in the annotation document: either a
/// single first-complete snapshot position (complete from there onward)
/// or a list of closed intervals `[start, end]`, `end: null` meaning
/// "until the end of the trace".
#[derive(Debug, Clone, PartialEq)]
pub enum ObjectiveTruth {
    From(u64),
    Intervals(Vec<(u64, Option<u64>)>),
}

impl Serialize for ObjectiveTruth {
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            ObjectiveTruth::From(i) => ser.serialize_u64(*i),
            ObjectiveTruth::Intervals(v) => v.serialize(ser),
        }
    }
}

impl<'de> Deserialize<'de> for ObjectiveTruth {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let v = serde_json::Value::deserialize(de)?;
        match v {
            serde_json::Value::Number(n) => {
                let i = n.as_u64().ok_or_else(|| {
                    D::Error::custom("objective truth index must be a non-negative integer")
                })?;
                Ok(ObjectiveTruth::From(i))
            }
            serde_json::Value::Array(_) => {
                let ivs: Vec<(u64, Option<u64>)> =
                    serde_json::from_value(v).map_err(D::Error::custom)?;
                Ok(ObjectiveTruth::Intervals(ivs))
            }
            _ => Err(D::Error::custom("objective truth must be an index or interval list")),
        }
    }
}

/// Wire format of one annotation document.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnnotationDoc {
    pub student_id: String,
    pub final_outcome: FinalOutcome,
    /// Trace length; may be omitted when the caller supplies it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_snapshots: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub impacts: Option<Vec<ImpactType>>,
    /// Keys are objective ids rendered as strings.
    pub objectives: BTreeMap<String, ObjectiveTruth>,
}

/// Expanded expert annotation for one student.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpertAnnotation {
    pub student_id: String,
    /// Sorted objective ids; the truth matrix columns follow this order.
    pub objective_ids: Vec<u32>,
    /// `matrix[snapshot][column]` is true when the objective is complete.
    pub matrix: Vec<Vec<bool>>,
    pub final_outcome: FinalOutcome,
    pub impact_labels: BTreeSet<ImpactType>,
}

impl ExpertAnnotation {
    pub fn n_snapshots(&self) -> usize {
        self.matrix.len()
    }

    fn column(&self, objective_id: u32) -> Option<usize> {
        self.objective_ids.iter().position(|&o| o == objective_id)
    }

    /// Truth at a snapshot position for one objective. Positions beyond the
    /// trace and unknown objectives read as false.
    pub fn truth(&self, snapshot: usize, objective_id: u32) -> bool {
        match self.column(objective_id) {
            Some(c) => self.matrix.get(snapshot).map_or(false, |row| row[c]),
            None => false,
        }
    }

    /// First snapshot position where the objective is complete.
    pub fn first_complete(&self, objective_id: u32) -> Option<u64> {
        let c = self.column(objective_id)?;
        self.matrix.iter().position(|row| row[c]).map(|i| i as u64)
    }

    /// Snapshot positions where the objective turns incomplete -> complete.
    pub fn rising_edges(&self, objective_id: u32) -> Vec<u64> {
        let Some(c) = self.column(objective_id) else { return Vec::new() };
        let mut edges = Vec::new();
        let mut prev = false;
        for (i, row) in self.matrix.iter().enumerate() {
            if row[c] && !prev {
                edges.push(i as u64);
            }
            prev = row[c];
        }
        edges
    }

    /// True when every objective is complete at the given snapshot.
    pub fn all_complete_at(&self, snapshot: usize) -> bool {
        self.matrix.get(snapshot).map_or(false, |row| row.iter().all(|&b| b))
    }

    /// Set of complete objective ids at the given snapshot.
    pub fn complete_set_at(&self, snapshot: usize) -> BTreeSet<u32> {
        match self.matrix.get(snapshot) {
            Some(row) => self
                .objective_ids
                .iter()
                .zip(row)
                .filter(|(_, &b)| b)
                .map(|(&o, _)| o)
                .collect(),
            None => BTreeSet::new(),
        }
    }
}

/// Expands an annotation document against a known trace length and
/// objective list. Unknown objective ids and positions beyond the trace
/// are errors; objectives missing from the document read as never
/// complete.
pub fn expand_annotation(
    doc: &AnnotationDoc,
    trace_len: usize,
    objective_ids: &[u32],
) -> Result<ExpertAnnotation> {
    let mut ids: Vec<u32> = objective_ids.to_vec();
    ids.sort_unstable();
    ids.dedup();
    let mut matrix = vec![vec![false; ids.len()]; trace_len];
    for (key, truth) in &doc.objectives {
        let oid: u32 = key.parse().map_err(|_| {
            Error::validation(format!(
                "annotation {}: objective key {key:?} is not an integer id",
                doc.student_id
            ))
        })?;
        let col = ids.iter().position(|&o| o == oid).ok_or_else(|| {
            Error::validation(format!(
                "annotation {}: unknown objective id {oid}",
                doc.student_id
            ))
        })?;
        let intervals: Vec<(u64, Option<u64>)> = match truth {
            ObjectiveTruth::From(i) => vec![(*i, None)],
            ObjectiveTruth::Intervals(v) => v.clone(),
        };
        for (start, end) in intervals {
            let end = end.unwrap_or(trace_len.saturating_sub(1) as u64);
            if start as usize >= trace_len || end as usize >= trace_len {
                return Err(Error::validation(format!(
                    "annotation {}: objective {oid} interval [{start}, {end}] exceeds trace length {trace_len}",
                    doc.student_id
                )));
            }
            if end < start {
                return Err(Error::validation(format!(
                    "annotation {}: objective {oid} interval [{start}, {end}] is inverted",
                    doc.student_id
                )));
            }
            for row in matrix.iter_mut().take(end as usize + 1).skip(start as usize) {
                row[col] = true;
            }
        }
    }
    Ok(ExpertAnnotation {
        student_id: doc.student_id.clone(),
        objective_ids: ids,
        matrix,
        final_outcome: doc.final_outcome,
        impact_labels: doc.impacts.clone().unwrap_or_default().into_iter().collect(),
    })
}

/// Parses a line-delimited annotation stream without expanding it.
pub fn parse_annotation_docs(text: &str) -> Result<Vec<AnnotationDoc>> {
    let mut docs = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let doc: AnnotationDoc = serde_json::from_str(line)
            .map_err(|e| Error::parse(format!("annotation line {}: {e}", lineno + 1)))?;
        docs.push(doc);
    }
    Ok(docs)
}

pub fn serialize_annotation_docs(docs: &[AnnotationDoc]) -> String {
    let mut out = String::new();
    for d in docs {
        out.push_str(&serde_json::to_string(d).expect("annotation serialization"));
        out.push('\n');
    }
    out
}
