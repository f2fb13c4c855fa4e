//! Impact analysis: how often the different kinds of inaccurate first
//! detections travelled together with observed changes in student
//! behaviour, plus screening heuristics that suggest impact labels for
//! expert review. The heuristics only surface candidates; the labels
//! that feed the tables stay expert-supplied.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::engine::{EventKind, ObjectiveEvent};
use crate::error::{Error, Result};
use crate::metrics::detection::{detection_records, DetectionRecord, DetectionType};
use crate::model::annotation::{ExpertAnnotation, ImpactType};
use crate::model::trace::StudentTrace;

/// Which detection types count as contributing to each impact type.
/// A student's record only counts as impacted when their label is linked
/// to the record's detection type here.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ImpactLinks(pub BTreeMap<ImpactType, BTreeSet<DetectionType>>);

impl Default for ImpactLinks {
    fn default() -> Self {
        use DetectionType::{Early, IncorrectDetection, IncorrectNonDetection, Late};
        let mut map = BTreeMap::new();
        map.insert(
            ImpactType::Ipb,
            BTreeSet::from([IncorrectDetection, Late]),
        );
        map.insert(
            ImpactType::Its,
            BTreeSet::from([IncorrectDetection, IncorrectNonDetection, Early, Late]),
        );
        map.insert(ImpactType::Es, BTreeSet::from([IncorrectDetection]));
        ImpactLinks(map)
    }
}

impl ImpactLinks {
    pub fn contributes(&self, impact: ImpactType, detection: DetectionType) -> bool {
        self.0.get(&impact).is_some_and(|set| set.contains(&detection))
    }

    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text)
            .map_err(|e| Error::parse(format!("invalid impact links document: {e}")))
    }
}

/// One detection-type row of the ratio table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRatioRow {
    pub detection: DetectionType,
    pub count: u64,
    pub by_objective: BTreeMap<u32, u64>,
    pub impacted: u64,
    /// `impacted / count`, absent when no records of this type exist.
    pub ratio: Option<f64>,
}

/// One impact-type row of the co-occurrence table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpactCoRow {
    pub impact: ImpactType,
    /// Distinct labelled students seen in the records.
    pub students: u64,
    /// Linked detection types actually observed for those students.
    pub detections: BTreeSet<DetectionType>,
}

/// A single (student, impact, detection type) association, kept raw so
/// conjoint responsibility stays visible instead of being folded into
/// one number.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ImpactLink {
    pub student_id: String,
    pub impact: ImpactType,
    pub detection: DetectionType,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpactTable {
    pub ratios: Vec<DetectionRatioRow>,
    pub co_occurrence: Vec<ImpactCoRow>,
    pub links: Vec<ImpactLink>,
}

/// Cross-tabulates first-detection records against per-student impact
/// labels. A record may link to several impacts at once.
pub fn impact_tables(
    records: &[DetectionRecord],
    impacts: &BTreeMap<String, BTreeSet<ImpactType>>,
    links: &ImpactLinks,
) -> Result<ImpactTable> {
    let students: BTreeSet<&str> = records.iter().map(|r| r.student_id.as_str()).collect();
    for student in impacts.keys() {
        if !students.contains(student.as_str()) {
            return Err(Error::validation(format!(
                "impact label references unknown student {student:?}"
            )));
        }
    }

    let impact_of = |record: &DetectionRecord| -> Vec<ImpactType> {
        impacts
            .get(&record.student_id)
            .into_iter()
            .flatten()
            .copied()
            .filter(|&impact| links.contributes(impact, record.detection))
            .collect()
    };

    let ratios = DetectionType::ALL
        .iter()
        .map(|&detection| {
            let mut count = 0u64;
            let mut impacted = 0u64;
            let mut by_objective = BTreeMap::new();
            for record in records.iter().filter(|r| r.detection == detection) {
                count += 1;
                *by_objective.entry(record.objective_id).or_insert(0u64) += 1;
                if !impact_of(record).is_empty() {
                    impacted += 1;
                }
            }
            let ratio = (count > 0).then(|| impacted as f64 / count as f64);
            DetectionRatioRow { detection, count, by_objective, impacted, ratio }
        })
        .collect();

    let mut link_set = BTreeSet::new();
    for record in records {
        for impact in impact_of(record) {
            link_set.insert(ImpactLink {
                student_id: record.student_id.clone(),
                impact,
                detection: record.detection,
            });
        }
    }
    let links_out: Vec<ImpactLink> = link_set.into_iter().collect();

    let co_occurrence = [ImpactType::Ipb, ImpactType::Its, ImpactType::Es]
        .into_iter()
        .map(|impact| {
            let labelled = impacts
                .iter()
                .filter(|(_, set)| set.contains(&impact))
                .count() as u64;
            let detections = links_out
                .iter()
                .filter(|l| l.impact == impact)
                .map(|l| l.detection)
                .collect();
            ImpactCoRow { impact, students: labelled, detections }
        })
        .collect();

    Ok(ImpactTable { ratios, co_occurrence, links: links_out })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HeuristicConfig {
    /// A student "kept working" when the time after the expert-complete
    /// point is at least this fraction of the time it took to get there.
    pub its_alpha: f64,
}

impl Default for HeuristicConfig {
    fn default() -> Self {
        HeuristicConfig { its_alpha: 0.5 }
    }
}

/// A suggested impact label with the snapshots that triggered it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeuristicFlag {
    pub impact: ImpactType,
    pub snapshots: Vec<u64>,
    pub evidence: String,
}

/// Screens one student for behaviour consistent with each impact type.
/// Emits at most one flag per type, carrying the first trigger found.
pub fn heuristic_flags(
    trace: &StudentTrace,
    events: &[ObjectiveEvent],
    expert: &ExpertAnnotation,
    config: &HeuristicConfig,
) -> Vec<HeuristicFlag> {
    let mut flags = Vec::new();
    let n = expert.n_snapshots();
    if n == 0 || trace.is_empty() {
        return flags;
    }
    let last = n - 1;
    let records = detection_records(events, expert);

    // IPB: an objective the detector wrongly marked complete, followed by
    // the student breaking something that genuinely worked.
    'ipb: for record in &records {
        let early_or_incorrect = matches!(
            record.detection,
            DetectionType::IncorrectDetection | DetectionType::Early
        );
        let Some(ts) = record.system_first else { continue };
        if !early_or_incorrect {
            continue;
        }
        for u in (ts as usize + 1)..n {
            let regressed = expert
                .objective_ids
                .iter()
                .find(|&&id| expert.truth(u - 1, id) && !expert.truth(u, id));
            if let Some(&id) = regressed {
                flags.push(HeuristicFlag {
                    impact: ImpactType::Ipb,
                    snapshots: vec![ts, u as u64],
                    evidence: format!(
                        "objective {} marked complete at snapshot {ts} ({}), \
                         objective {id} later regressed at snapshot {u}",
                        record.objective_id,
                        record.detection.short(),
                    ),
                });
                break 'ipb;
            }
        }
    }

    // ITS: the solution was genuinely done at t1, yet the student kept
    // going for a substantial extra stretch while feedback withheld or
    // delayed a completion.
    let t1_pos = (0..n).find(|&s| expert.all_complete_at(s));
    if let Some(pos) = t1_pos {
        if let Some(t1_abs) = trace.timestamp_at(pos) {
            let t1 = t1_abs - trace.start_time();
            let remaining = trace.end_time() - t1_abs;
            let stalled = records.iter().any(|r| {
                matches!(
                    r.detection,
                    DetectionType::IncorrectNonDetection | DetectionType::Late
                )
            });
            if stalled && remaining >= config.its_alpha * t1 {
                flags.push(HeuristicFlag {
                    impact: ImpactType::Its,
                    snapshots: vec![pos as u64],
                    evidence: format!(
                        "expert-complete after {t1:.0}s but {remaining:.0}s of further \
                         work with an undetected or late objective"
                    ),
                });
            }
        }
    }

    // ES: the detector showed everything green at the end while the
    // expert still saw unfinished objectives.
    let mut last_kind: BTreeMap<u32, EventKind> = BTreeMap::new();
    for event in events {
        last_kind.insert(event.objective_id, event.kind);
    }
    let all_system_green = expert
        .objective_ids
        .iter()
        .all(|id| last_kind.get(id).is_some_and(|k| k.is_completion()));
    let expert_incomplete: Vec<u32> = expert
        .objective_ids
        .iter()
        .copied()
        .filter(|&id| !expert.truth(last, id))
        .collect();
    if all_system_green && !expert_incomplete.is_empty() {
        flags.push(HeuristicFlag {
            impact: ImpactType::Es,
            snapshots: vec![last as u64],
            evidence: format!(
                "all objectives shown complete at snapshot {last} while \
                 objective(s) {expert_incomplete:?} were not"
            ),
        });
    }

    flags.sort_by_key(|f| f.impact);
    flags
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::detection::classify_detection;
    use crate::model::annotation::FinalOutcome;
    use crate::model::ast::AstNode;
    use crate::model::trace::Snapshot;

    fn record(student: &str, obj: u32, sys: Option<u64>, exp: Option<u64>) -> DetectionRecord {
        DetectionRecord {
            student_id: student.into(),
            objective_id: obj,
            system_first: sys,
            expert_first: exp,
            detection: classify_detection(sys, exp),
        }
    }

    fn leaf(label: &str) -> AstNode {
        AstNode { label: label.into(), value: None, children: Vec::new() }
    }

    fn trace_with_times(times: &[f64]) -> StudentTrace {
        StudentTrace {
            student_id: "s1".into(),
            snapshots: times
                .iter()
                .enumerate()
                .map(|(i, &t)| Snapshot {
                    index: i as u64,
                    timestamp_s: t,
                    root: leaf("x"),
                })
                .collect(),
            submitted: true,
        }
    }

    fn annotation(matrix: Vec<Vec<bool>>, objective_ids: Vec<u32>) -> ExpertAnnotation {
        ExpertAnnotation {
            student_id: "s1".into(),
            objective_ids,
            matrix,
            final_outcome: FinalOutcome::Working,
            impact_labels: Default::default(),
        }
    }

    fn event(at: u64, obj: u32, kind: EventKind) -> ObjectiveEvent {
        ObjectiveEvent {
            student_id: "s1".into(),
            snapshot_index: at,
            objective_id: obj,
            kind,
        }
    }

    #[test]
    fn ratio_table_counts_linked_records_only() {
        let records = vec![
            record("s1", 1, Some(2), None),    // ID
            record("s1", 2, Some(9), Some(4)), // L
            record("s2", 1, Some(2), None),    // ID
            record("s2", 2, Some(3), Some(3)), // CD
            record("s3", 1, Some(1), Some(4)), // E
            record("s3", 2, Some(3), Some(3)), // CD
        ];
        let mut impacts = BTreeMap::new();
        impacts.insert("s1".to_string(), BTreeSet::from([ImpactType::Ipb]));
        impacts.insert("s3".to_string(), BTreeSet::from([ImpactType::Its]));
        let table = impact_tables(&records, &impacts, &ImpactLinks::default()).unwrap();

        let row = |d: DetectionType| table.ratios.iter().find(|r| r.detection == d).unwrap();
        let id = row(DetectionType::IncorrectDetection);
        assert_eq!((id.count, id.impacted), (2, 1));
        assert_eq!(id.ratio, Some(0.5));
        assert_eq!(id.by_objective, BTreeMap::from([(1, 2)]));
        let late = row(DetectionType::Late);
        assert_eq!((late.count, late.impacted, late.ratio), (1, 1, Some(1.0)));
        let early = row(DetectionType::Early);
        assert_eq!((early.count, early.impacted, early.ratio), (1, 1, Some(1.0)));
        let cd = row(DetectionType::CorrectDetection);
        assert_eq!((cd.count, cd.impacted, cd.ratio), (2, 0, Some(0.0)));
        assert_eq!(row(DetectionType::CorrectNonDetection).ratio, None);

        let ipb = &table.co_occurrence[0];
        assert_eq!(ipb.impact, ImpactType::Ipb);
        assert_eq!(ipb.students, 1);
        assert_eq!(
            ipb.detections,
            BTreeSet::from([DetectionType::IncorrectDetection, DetectionType::Late])
        );
        let es = &table.co_occurrence[2];
        assert_eq!((es.students, es.detections.len()), (0, 0));

        assert_eq!(table.links.len(), 3);
        assert!(table.links.contains(&ImpactLink {
            student_id: "s3".into(),
            impact: ImpactType::Its,
            detection: DetectionType::Early,
        }));
    }

    #[test]
    fn no_labels_gives_zero_ratios() {
        let records = vec![record("s1", 1, Some(2), None), record("s1", 2, None, Some(1))];
        let table = impact_tables(&records, &BTreeMap::new(), &ImpactLinks::default()).unwrap();
        for row in &table.ratios {
            if row.count > 0 {
                assert_eq!(row.ratio, Some(0.0), "{:?}", row.detection);
            } else {
                assert_eq!(row.ratio, None);
            }
        }
        assert!(table.links.is_empty());
    }

    #[test]
    fn unknown_student_in_labels_is_rejected() {
        let records = vec![record("s1", 1, Some(2), None)];
        let mut impacts = BTreeMap::new();
        impacts.insert("ghost".to_string(), BTreeSet::from([ImpactType::Es]));
        let err = impact_tables(&records, &impacts, &ImpactLinks::default()).unwrap_err();
        assert!(err.to_string().contains("ghost"));
    }

    #[test]
    fn links_document_parses_short_codes() {
        let links = ImpactLinks::parse(r#"{"IPB": ["ID", "L"], "ES": ["ID"]}"#).unwrap();
        assert!(links.contributes(ImpactType::Ipb, DetectionType::Late));
        assert!(!links.contributes(ImpactType::Its, DetectionType::Late));
        assert!(ImpactLinks::parse(r#"{"IPB": ["bogus"]}"#).is_err());
    }

    #[test]
    fn early_submission_flagged_when_detector_all_green() {
        let trace = trace_with_times(&[0.0, 60.0, 120.0]);
        // expert: objective 2 never done, objective 1 done from snapshot 1
        let expert = annotation(
            vec![vec![false, false], vec![true, false], vec![true, false]],
            vec![1, 2],
        );
        let events = vec![
            event(1, 1, EventKind::Completed),
            event(2, 2, EventKind::Completed),
        ];
        let flags = heuristic_flags(&trace, &events, &expert, &HeuristicConfig::default());
        let es: Vec<_> = flags.iter().filter(|f| f.impact == ImpactType::Es).collect();
        assert_eq!(es.len(), 1);
        assert_eq!(es[0].snapshots, vec![2]);

        // one objective red at the end: no flag
        let events = vec![event(1, 1, EventKind::Completed), event(2, 2, EventKind::Broken)];
        let flags = heuristic_flags(&trace, &events, &expert, &HeuristicConfig::default());
        assert!(flags.iter().all(|f| f.impact != ImpactType::Es));
    }

    #[test]
    fn time_sink_flag_depends_on_alpha() {
        // expert fully done at snapshot 1 (t1 = 100s), trace runs to 300s
        let trace = trace_with_times(&[0.0, 100.0, 200.0, 300.0]);
        let expert = annotation(
            vec![vec![false], vec![true], vec![true], vec![true]],
            vec![1],
        );
        let events = Vec::new(); // objective 1 is IND
        let flags = heuristic_flags(&trace, &events, &expert, &HeuristicConfig::default());
        let its: Vec<_> = flags.iter().filter(|f| f.impact == ImpactType::Its).collect();
        assert_eq!(its.len(), 1);
        assert_eq!(its[0].snapshots, vec![1]);

        // demand 10x the build-up time: 200s of slack is no longer enough
        let strict = HeuristicConfig { its_alpha: 10.0 };
        let flags = heuristic_flags(&trace, &events, &expert, &strict);
        assert!(flags.is_empty());
    }

    #[test]
    fn perception_flag_needs_wrong_detection_then_regression() {
        let trace = trace_with_times(&[0.0, 60.0, 120.0, 180.0]);
        // objective 1 never truly done; objective 2 done then broken at snapshot 2
        let expert = annotation(
            vec![
                vec![false, true],
                vec![false, true],
                vec![false, false],
                vec![false, false],
            ],
            vec![1, 2],
        );
        let events = vec![event(1, 1, EventKind::Completed)];
        let flags = heuristic_flags(&trace, &events, &expert, &HeuristicConfig::default());
        let ipb: Vec<_> = flags.iter().filter(|f| f.impact == ImpactType::Ipb).collect();
        assert_eq!(ipb.len(), 1);
        assert_eq!(ipb[0].snapshots, vec![1, 2]);

        // same regression but no wrong detection anywhere: nothing to flag
        let flags = heuristic_flags(&trace, &[], &expert, &HeuristicConfig::default());
        assert!(flags.iter().all(|f| f.impact != ImpactType::Ipb));
    }

    #[test]
    fn clean_trace_raises_no_flags() {
        let trace = trace_with_times(&[0.0, 60.0]);
        let expert = annotation(vec![vec![false], vec![true]], vec![1]);
        let events = vec![event(1, 1, EventKind::Completed)];
        assert!(heuristic_flags(&trace, &events, &expert, &HeuristicConfig::default()).is_empty());
    }
}
