//! End-to-end orchestration: mine a corpus, replay every trace, score
//! the detections against expert truth and bundle every artifact the
//! report command writes. Kept in the library so tests can run the whole
//! path in-process.

use std::collections::BTreeMap;
use std::collections::BTreeSet;

use serde::Serialize;

use crate::engine::{replay, serialize_events, serialize_objectives, ObjectiveEvent, ObjectiveSpec};
use crate::error::{Error, Result};
use crate::graph::{
    aggregate, expert_state_sequence, export_dot, paths_csv, simplify_phase1, simplify_phase2,
    simplify_phase3, system_state_sequence, GraphSource, TransitionGraph,
};
use crate::metrics::{
    detection_records, heuristic_flags, impact_tables, tag_events, ConfusionCounts,
    DetectionRecord, DetectionSummary, HeuristicConfig, HeuristicFlag, ImpactLinks, ImpactTable,
    RateMetrics, TimingOffsetStats,
};
use crate::mining::io::{serialize_features_doc, to_features_doc};
use crate::mining::{mine, MiningConfig, MiningResult};
use crate::model::{expand_annotation, AnnotationDoc, ExpertAnnotation, SolutionCorpus, StudentTrace};
use crate::phases::{phase_report, report_csv, scatter_datasets, PhaseConfig, PhaseReport};
use crate::synth::{derive_objectives, ObjectiveProbe};

/// Tuning for a full report run.
#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub mining: MiningConfig,
    /// Snapshot tolerance when tagging completion events.
    pub evaluation_tolerance: i64,
    /// Minimum student fraction an edge needs to survive graph stage 1.
    pub graph_min_fraction: f64,
    /// Minimum traversal count for the frequent-path table.
    pub path_min_count: u64,
    pub phases: PhaseConfig,
    pub heuristics: HeuristicConfig,
    pub impact_links: ImpactLinks,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            mining: MiningConfig::default(),
            evaluation_tolerance: 1,
            graph_min_fraction: 0.1,
            path_min_count: 3,
            phases: PhaseConfig::default(),
            heuristics: HeuristicConfig::default(),
            impact_links: ImpactLinks::default(),
        }
    }
}

/// Per-student attention flags.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudentFlags {
    pub student_id: String,
    pub flags: Vec<HeuristicFlag>,
}

/// Everything a report run produces.
#[derive(Debug, Clone)]
pub struct ReportOutput {
    pub mining: MiningResult,
    pub objectives: Vec<ObjectiveSpec>,
    pub events: Vec<ObjectiveEvent>,
    pub counts: ConfusionCounts,
    pub rates: RateMetrics,
    pub detection_records: Vec<DetectionRecord>,
    pub detection_summary: DetectionSummary,
    pub timing: TimingOffsetStats,
    pub impact: ImpactTable,
    pub flags: Vec<StudentFlags>,
    pub expert_graph: TransitionGraph,
    pub system_graph: TransitionGraph,
    pub expert_paths_csv: String,
    pub system_paths_csv: String,
    pub phase_report: PhaseReport,
    pub phases_csv: String,
    pub scatter: Vec<(String, String)>,
}

fn simplify(graph: &TransitionGraph, min_fraction: f64) -> Result<TransitionGraph> {
    let g = simplify_phase1(graph, min_fraction)?;
    let g = simplify_phase2(&g);
    Ok(simplify_phase3(&g))
}

/// Runs mine, replay, evaluation, graphs and phase analysis in one pass.
///
/// Every trace needs a matching annotation document; objective ids come
/// from the probes. Deterministic: identical inputs give identical
/// output, including the rendered artifacts.
pub fn run_report(
    corpus: &SolutionCorpus,
    traces: &[StudentTrace],
    annotation_docs: &[AnnotationDoc],
    probes: &[ObjectiveProbe],
    config: &PipelineConfig,
) -> Result<ReportOutput> {
    let mining = mine(corpus, Some(traces), &config.mining)?;
    let objectives = derive_objectives(&mining.features, probes)?;
    let objective_ids: Vec<u32> = objectives.iter().map(|o| o.id).collect();

    let docs_by_student: BTreeMap<&str, &AnnotationDoc> =
        annotation_docs.iter().map(|d| (d.student_id.as_str(), d)).collect();

    let mut events: Vec<ObjectiveEvent> = Vec::new();
    let mut experts: Vec<ExpertAnnotation> = Vec::with_capacity(traces.len());
    for trace in traces {
        let doc = docs_by_student.get(trace.student_id.as_str()).ok_or_else(|| {
            Error::validation(format!("no annotation for student {:?}", trace.student_id))
        })?;
        experts.push(expand_annotation(doc, trace.len(), &objective_ids)?);
        let output = replay(trace, &mining.features, &objectives)?;
        events.extend(output.events);
    }

    let mut counts = ConfusionCounts::default();
    let mut records: Vec<DetectionRecord> = Vec::new();
    let mut flags: Vec<StudentFlags> = Vec::new();
    let mut impacts: BTreeMap<String, BTreeSet<_>> = BTreeMap::new();
    for (trace, expert) in traces.iter().zip(&experts) {
        let own: Vec<ObjectiveEvent> = events
            .iter()
            .filter(|e| e.student_id == trace.student_id)
            .cloned()
            .collect();
        let outcome = tag_events(&own, expert, config.evaluation_tolerance)?;
        counts.tp += outcome.counts.tp;
        counts.fp += outcome.counts.fp;
        counts.tn += outcome.counts.tn;
        counts.fn_ += outcome.counts.fn_;
        records.extend(detection_records(&own, expert));
        flags.push(StudentFlags {
            student_id: trace.student_id.clone(),
            flags: heuristic_flags(trace, &own, expert, &config.heuristics),
        });
        if !expert.impact_labels.is_empty() {
            impacts.insert(trace.student_id.clone(), expert.impact_labels.clone());
        }
    }
    let rates = counts.rates();
    let detection_summary = DetectionSummary::from_records(&records);
    let timing = TimingOffsetStats::from_summary(&detection_summary);
    let impact = impact_tables(&records, &impacts, &config.impact_links)?;

    let expert_sequences = traces
        .iter()
        .zip(&experts)
        .map(|(trace, expert)| expert_state_sequence(expert, Some(trace)))
        .collect::<Result<Vec<_>>>()?;
    let system_sequences = traces
        .iter()
        .map(|trace| {
            let own: Vec<ObjectiveEvent> = events
                .iter()
                .filter(|e| e.student_id == trace.student_id)
                .cloned()
                .collect();
            system_state_sequence(&trace.student_id, &own, Some(trace))
        })
        .collect::<Result<Vec<_>>>()?;
    let population = traces.len() as u64;
    let expert_graph = simplify(
        &aggregate(expert_sequences, population, GraphSource::Expert)?,
        config.graph_min_fraction,
    )?;
    let system_graph = simplify(
        &aggregate(system_sequences, population, GraphSource::System)?,
        config.graph_min_fraction,
    )?;
    let expert_paths_csv = paths_csv(&expert_graph, config.path_min_count);
    let system_paths_csv = paths_csv(&system_graph, config.path_min_count);

    let phase_report = phase_report(traces, &events, &records, &config.phases)?;
    let phases_csv = report_csv(&phase_report);
    let scatter = scatter_datasets(&phase_report);

    Ok(ReportOutput {
        mining,
        objectives,
        events,
        counts,
        rates,
        detection_records: records,
        detection_summary,
        timing,
        impact,
        flags,
        expert_graph,
        system_graph,
        expert_paths_csv,
        system_paths_csv,
        phase_report,
        phases_csv,
        scatter,
    })
}

fn pretty(value: &impl Serialize) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("report artifact serialize");
    text.push('\n');
    text
}

impl ReportOutput {
    /// System recall against expert truth; the headline number.
    pub fn true_positive_rate(&self) -> Option<f64> {
        self.rates.recall
    }

    /// Renders every artifact as (file name, content).
    pub fn artifacts(&self) -> Vec<(String, String)> {
        let mut files = vec![
            (
                "features.json".to_string(),
                serialize_features_doc(&to_features_doc(&self.mining)),
            ),
            ("objectives.json".to_string(), serialize_objectives(&self.objectives)),
            ("mining_report.json".to_string(), pretty(&self.mining.report)),
            ("events.jsonl".to_string(), serialize_events(&self.events)),
            (
                "metrics.json".to_string(),
                pretty(&serde_json::json!({ "counts": self.counts, "rates": self.rates })),
            ),
            (
                "detection.json".to_string(),
                pretty(&serde_json::json!({
                    "records": self.detection_records,
                    "summary": self.detection_summary,
                    "timing": self.timing,
                })),
            ),
            (
                "impact.json".to_string(),
                pretty(&serde_json::json!({ "table": self.impact, "flags": self.flags })),
            ),
            ("expert_graph.dot".to_string(), export_dot(&self.expert_graph)),
            ("system_graph.dot".to_string(), export_dot(&self.system_graph)),
            ("expert_paths.csv".to_string(), self.expert_paths_csv.clone()),
            ("system_paths.csv".to_string(), self.system_paths_csv.clone()),
            ("phases.csv".to_string(), self.phases_csv.clone()),
        ];
        for (name, content) in &self.scatter {
            files.push((format!("{name}.csv"), content.clone()));
        }
        files
    }
}
