//! Command-line front end: one subcommand per pipeline stage plus a
//! bundled report, all writing into a self-describing output directory.

use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use feedmine::engine::{
    parse_events, parse_objectives, replay, serialize_events, serialize_objectives, ObjectiveEvent,
};
use feedmine::graph::{
    aggregate, expert_state_sequence, export_dot, paths_csv, simplify_phase1, simplify_phase2,
    simplify_phase3, system_state_sequence, GraphSource, StateSequence, TransitionGraph,
};
use feedmine::metrics::{
    detection_records, heuristic_flags, impact_tables, tag_events, ConfusionCounts,
    DetectionRecord, DetectionSummary, HeuristicConfig, ImpactLinks, TimingOffsetStats,
};
use feedmine::mining::io::{
    from_features_doc, parse_features_doc, serialize_features_doc, to_features_doc,
};
use feedmine::mining::{mine, MiningConfig};
use feedmine::model::{
    expand_annotation, parse_annotation_docs, parse_corpus, parse_traces,
    serialize_annotation_docs, serialize_corpus, serialize_traces, AnnotationDoc,
    ExpertAnnotation, StudentTrace,
};
use feedmine::phases::{phase_report, report_csv, scatter_datasets, PhaseConfig};
use feedmine::pipeline::{run_report, PipelineConfig, StudentFlags};
use feedmine::synth::{
    derive_objectives, generate_corpus, generate_traces, parse_probes, serialize_probes,
    standard_probes, to_annotation_doc, GeneratorConfig,
};
use feedmine::{Error, Result};

#[derive(Parser)]
#[command(name = "feedmine", version, about = "Solution-feature mining and feedback evaluation")]
struct Cli {
    /// Run configuration file (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory. Created if absent.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Overrides the generator seed from the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Leave the timestamp out of the run manifest.
    #[arg(long, global = true)]
    no_timestamp: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum GraphMode {
    Expert,
    System,
}

#[derive(Subcommand)]
enum Command {
    /// Mine common solution features from a corpus.
    Mine {
        #[arg(long)]
        corpus: PathBuf,
        /// Training traces for the clustering resolution guard.
        #[arg(long)]
        traces: Option<PathBuf>,
        /// Probe trees; when given, grouped objectives are written too.
        #[arg(long)]
        probes: Option<PathBuf>,
    },
    /// Replay traces against features and objectives, writing event logs.
    Replay {
        #[arg(long)]
        traces: PathBuf,
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        objectives: PathBuf,
    },
    /// Score event logs against expert annotations.
    Evaluate {
        #[arg(long)]
        events: PathBuf,
        #[arg(long)]
        annotations: PathBuf,
        #[arg(long)]
        objectives: PathBuf,
        /// Traces enable the per-student impact heuristics.
        #[arg(long)]
        traces: Option<PathBuf>,
    },
    /// Build a state transition graph and its frequent-path table.
    Graph {
        #[arg(long, value_enum)]
        mode: GraphMode,
        /// Simplification stages to apply, 0 to 3.
        #[arg(long, default_value_t = 3)]
        stages: u8,
        /// Expert annotations (expert mode).
        #[arg(long)]
        annotations: Option<PathBuf>,
        /// Event logs (system mode).
        #[arg(long)]
        events: Option<PathBuf>,
        /// Traces add timing and cover students without events.
        #[arg(long)]
        traces: Option<PathBuf>,
    },
    /// Segment traces into phases and write the scatter datasets.
    Phases {
        #[arg(long)]
        traces: PathBuf,
        #[arg(long)]
        events: PathBuf,
        #[arg(long)]
        annotations: PathBuf,
        #[arg(long)]
        objectives: PathBuf,
    },
    /// Generate a synthetic corpus, trace cohort and probe set.
    Gen,
    /// Run the whole pipeline and write every artifact.
    ///
    /// Give all four inputs to run on real data, or none to run on a
    /// freshly generated cohort.
    Report {
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        traces: Option<PathBuf>,
        #[arg(long)]
        annotations: Option<PathBuf>,
        #[arg(long)]
        probes: Option<PathBuf>,
    },
}

/// On-disk run configuration. Every section is optional and falls back
/// to the built-in defaults.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RunConfig {
    mining: MiningConfig,
    evaluation_tolerance: i64,
    graph_min_fraction: f64,
    path_min_count: u64,
    phases: PhaseConfig,
    heuristics: HeuristicConfig,
    impact_links: ImpactLinks,
    generator: GeneratorConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        let p = PipelineConfig::default();
        RunConfig {
            mining: p.mining,
            evaluation_tolerance: p.evaluation_tolerance,
            graph_min_fraction: p.graph_min_fraction,
            path_min_count: p.path_min_count,
            phases: p.phases,
            heuristics: p.heuristics,
            impact_links: p.impact_links,
            generator: GeneratorConfig::default(),
        }
    }
}

impl RunConfig {
    fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            mining: self.mining.clone(),
            evaluation_tolerance: self.evaluation_tolerance,
            graph_min_fraction: self.graph_min_fraction,
            path_min_count: self.path_min_count,
            phases: self.phases,
            heuristics: self.heuristics,
            impact_links: self.impact_links.clone(),
        }
    }
}

/// Parses arguments (without the binary name) and runs one command.
/// Returns the process exit code: 0 success, 1 bad input, 2 I/O
/// failure, 3 internal error.
pub fn run<I: IntoIterator<Item = String>>(args: I) -> i32 {
    let argv = std::iter::once("feedmine".to_string()).chain(args);
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

struct OutDir {
    dir: PathBuf,
}

impl OutDir {
    fn create(dir: &Path) -> Result<OutDir> {
        fs::create_dir_all(dir)?;
        Ok(OutDir { dir: dir.to_path_buf() })
    }

    fn write(&self, name: &str, content: &str) -> Result<()> {
        fs::write(self.dir.join(name), content)?;
        Ok(())
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    inputs: BTreeMap<&'a str, String>,
    config: &'a RunConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    timestamp_unix_s: Option<u64>,
}

fn write_manifest(
    out: &OutDir,
    command: &str,
    inputs: &[(&str, Option<&Path>)],
    config: &RunConfig,
    no_timestamp: bool,
) -> Result<()> {
    let manifest = Manifest {
        command,
        inputs: inputs
            .iter()
            .filter_map(|(k, v)| v.map(|p| (*k, p.display().to_string())))
            .collect(),
        config,
        timestamp_unix_s: if no_timestamp {
            None
        } else {
            std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .ok()
                .map(|d| d.as_secs())
        },
    };
    let mut text = serde_json::to_string_pretty(&manifest)
        .map_err(|e| Error::internal(format!("manifest serialize: {e}")))?;
    text.push('\n');
    out.write("run.json", &text)
}

fn execute(cli: Cli) -> Result<()> {
    let mut config: RunConfig = match &cli.config {
        Some(path) => serde_json::from_str(&read(path)?)
            .map_err(|e| Error::parse(format!("run configuration: {e}")))?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.generator.seed = seed;
    }
    let out = OutDir::create(&cli.out)?;

    match &cli.command {
        Command::Mine { corpus, traces, probes } => {
            write_manifest(
                &out,
                "mine",
                &[
                    ("corpus", Some(corpus)),
                    ("traces", traces.as_deref()),
                    ("probes", probes.as_deref()),
                ],
                &config,
                cli.no_timestamp,
            )?;
            let corpus = parse_corpus(&read(corpus)?)?;
            let traces = match traces {
                Some(path) => Some(parse_traces(&read(path)?)?),
                None => None,
            };
            let result = mine(&corpus, traces.as_deref(), &config.mining)?;
            out.write("features.json", &serialize_features_doc(&to_features_doc(&result)))?;
            out.write("mining_report.json", &pretty(&result.report)?)?;
            if let Some(path) = probes {
                let probes = parse_probes(&read(path)?)?;
                let objectives = derive_objectives(&result.features, &probes)?;
                out.write("objectives.json", &serialize_objectives(&objectives))?;
            }
            Ok(())
        }
        Command::Replay { traces, features, objectives } => {
            write_manifest(
                &out,
                "replay",
                &[
                    ("traces", Some(traces)),
                    ("features", Some(features)),
                    ("objectives", Some(objectives)),
                ],
                &config,
                cli.no_timestamp,
            )?;
            let traces = parse_traces(&read(traces)?)?;
            let features = from_features_doc(&parse_features_doc(&read(features)?)?)?;
            let objectives = parse_objectives(&read(objectives)?)?;
            let mut events = Vec::new();
            for trace in &traces {
                events.extend(replay(trace, &features, &objectives)?.events);
            }
            out.write("events.jsonl", &serialize_events(&events))
        }
        Command::Evaluate { events, annotations, objectives, traces } => {
            write_manifest(
                &out,
                "evaluate",
                &[
                    ("events", Some(events)),
                    ("annotations", Some(annotations)),
                    ("objectives", Some(objectives)),
                    ("traces", traces.as_deref()),
                ],
                &config,
                cli.no_timestamp,
            )?;
            let events = parse_events(&read(events)?)?;
            let docs = parse_annotation_docs(&read(annotations)?)?;
            let objective_ids: Vec<u32> =
                parse_objectives(&read(objectives)?)?.iter().map(|o| o.id).collect();
            let traces = match traces {
                Some(path) => Some(parse_traces(&read(path)?)?),
                None => None,
            };
            evaluate(&out, &config, &events, &docs, &objective_ids, traces.as_deref())
        }
        Command::Graph { mode, stages, annotations, events, traces } => {
            write_manifest(
                &out,
                "graph",
                &[
                    ("annotations", annotations.as_deref()),
                    ("events", events.as_deref()),
                    ("traces", traces.as_deref()),
                ],
                &config,
                cli.no_timestamp,
            )?;
            if *stages > 3 {
                return Err(Error::validation(format!(
                    "stages must be 0..=3, got {stages}"
                )));
            }
            let traces = match traces {
                Some(path) => Some(parse_traces(&read(path)?)?),
                None => None,
            };
            let graph = build_graph(
                *mode,
                annotations.as_deref(),
                events.as_deref(),
                traces.as_deref(),
                &config,
                *stages,
            )?;
            let name = match mode {
                GraphMode::Expert => "expert",
                GraphMode::System => "system",
            };
            out.write(&format!("{name}_graph.dot"), &export_dot(&graph))?;
            out.write(&format!("{name}_paths.csv"), &paths_csv(&graph, config.path_min_count))
        }
        Command::Phases { traces, events, annotations, objectives } => {
            write_manifest(
                &out,
                "phases",
                &[
                    ("traces", Some(traces)),
                    ("events", Some(events)),
                    ("annotations", Some(annotations)),
                    ("objectives", Some(objectives)),
                ],
                &config,
                cli.no_timestamp,
            )?;
            let traces = parse_traces(&read(traces)?)?;
            let events = parse_events(&read(events)?)?;
            let docs = parse_annotation_docs(&read(annotations)?)?;
            let objective_ids: Vec<u32> =
                parse_objectives(&read(objectives)?)?.iter().map(|o| o.id).collect();
            let mut records = Vec::new();
            for trace in &traces {
                let expert = expand_for(&docs, &trace.student_id, trace.len(), &objective_ids)?;
                let own = events_of(&events, &trace.student_id);
                records.extend(detection_records(&own, &expert));
            }
            let report = phase_report(&traces, &events, &records, &config.phases)?;
            out.write("phases.csv", &report_csv(&report))?;
            for (name, content) in scatter_datasets(&report) {
                out.write(&format!("{name}.csv"), &content)?;
            }
            Ok(())
        }
        Command::Gen => {
            write_manifest(&out, "gen", &[], &config, cli.no_timestamp)?;
            let corpus = generate_corpus(&config.generator)?;
            let (traces, annotations) = generate_traces(&config.generator)?;
            let docs: Vec<AnnotationDoc> = annotations.iter().map(to_annotation_doc).collect();
            out.write("corpus.json", &serialize_corpus(&corpus))?;
            out.write("traces.jsonl", &serialize_traces(&traces))?;
            out.write("annotations.jsonl", &serialize_annotation_docs(&docs))?;
            out.write("probes.json", &serialize_probes(&standard_probes()))
        }
        Command::Report { corpus, traces, annotations, probes } => {
            write_manifest(
                &out,
                "report",
                &[
                    ("corpus", corpus.as_deref()),
                    ("traces", traces.as_deref()),
                    ("annotations", annotations.as_deref()),
                    ("probes", probes.as_deref()),
                ],
                &config,
                cli.no_timestamp,
            )?;
            let given = [corpus, traces, annotations, probes];
            let output = if given.iter().all(|p| p.is_some()) {
                let corpus = parse_corpus(&read(corpus.as_deref().unwrap())?)?;
                let traces = parse_traces(&read(traces.as_deref().unwrap())?)?;
                let docs = parse_annotation_docs(&read(annotations.as_deref().unwrap())?)?;
                let probes = parse_probes(&read(probes.as_deref().unwrap())?)?;
                run_report(&corpus, &traces, &docs, &probes, &config.pipeline())?
            } else if given.iter().all(|p| p.is_none()) {
                let corpus = generate_corpus(&config.generator)?;
                let (traces, annotations) = generate_traces(&config.generator)?;
                let docs: Vec<AnnotationDoc> =
                    annotations.iter().map(to_annotation_doc).collect();
                out.write("corpus.json", &serialize_corpus(&corpus))?;
                out.write("traces.jsonl", &serialize_traces(&traces))?;
                out.write("annotations.jsonl", &serialize_annotation_docs(&docs))?;
                out.write("probes.json", &serialize_probes(&standard_probes()))?;
                run_report(&corpus, &traces, &docs, &standard_probes(), &config.pipeline())?
            } else {
                return Err(Error::validation(
                    "report needs either all of --corpus/--traces/--annotations/--probes or none",
                ));
            };
            for (name, content) in output.artifacts() {
                out.write(&name, &content)?;
            }
            Ok(())
        }
    }
}

fn pretty(value: &impl Serialize) -> Result<String> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::internal(format!("artifact serialize: {e}")))?;
    text.push('\n');
    Ok(text)
}

fn events_of(events: &[ObjectiveEvent], student_id: &str) -> Vec<ObjectiveEvent> {
    events.iter().filter(|e| e.student_id == student_id).cloned().collect()
}

fn expand_for(
    docs: &[AnnotationDoc],
    student_id: &str,
    trace_len: usize,
    objective_ids: &[u32],
) -> Result<ExpertAnnotation> {
    let doc = docs
        .iter()
        .find(|d| d.student_id == student_id)
        .ok_or_else(|| Error::validation(format!("no annotation for student {student_id:?}")))?;
    expand_annotation(doc, trace_len, objective_ids)
}

fn doc_length(doc: &AnnotationDoc) -> Result<usize> {
    doc.n_snapshots.map(|n| n as usize).ok_or_else(|| {
        Error::validation(format!(
            "annotation {:?} has no snapshot count and no trace was given",
            doc.student_id
        ))
    })
}

fn evaluate(
    out: &OutDir,
    config: &RunConfig,
    events: &[ObjectiveEvent],
    docs: &[AnnotationDoc],
    objective_ids: &[u32],
    traces: Option<&[StudentTrace]>,
) -> Result<()> {
    let trace_of = |id: &str| traces.and_then(|ts| ts.iter().find(|t| t.student_id == id));
    let mut counts = ConfusionCounts::default();
    let mut records: Vec<DetectionRecord> = Vec::new();
    let mut flags: Vec<StudentFlags> = Vec::new();
    let mut impacts: BTreeMap<String, BTreeSet<_>> = BTreeMap::new();
    for doc in docs {
        let len = match trace_of(&doc.student_id) {
            Some(trace) => trace.len(),
            None => doc_length(doc)?,
        };
        let expert = expand_annotation(doc, len, objective_ids)?;
        let own = events_of(events, &doc.student_id);
        let outcome = tag_events(&own, &expert, config.evaluation_tolerance)?;
        counts.tp += outcome.counts.tp;
        counts.fp += outcome.counts.fp;
        counts.tn += outcome.counts.tn;
        counts.fn_ += outcome.counts.fn_;
        records.extend(detection_records(&own, &expert));
        if let Some(trace) = trace_of(&doc.student_id) {
            flags.push(StudentFlags {
                student_id: doc.student_id.clone(),
                flags: heuristic_flags(trace, &own, &expert, &config.heuristics),
            });
        }
        if !expert.impact_labels.is_empty() {
            impacts.insert(doc.student_id.clone(), expert.impact_labels.clone());
        }
    }
    let rates = counts.rates();
    let summary = DetectionSummary::from_records(&records);
    let timing = TimingOffsetStats::from_summary(&summary);
    let table = impact_tables(&records, &impacts, &config.impact_links)?;

    out.write("metrics.json", &pretty(&serde_json::json!({ "counts": counts, "rates": rates }))?)?;
    out.write(
        "detection.json",
        &pretty(&serde_json::json!({
            "records": records,
            "summary": summary,
            "timing": timing,
        }))?,
    )?;
    out.write(
        "impact.json",
        &pretty(&serde_json::json!({ "table": table, "flags": flags }))?,
    )
}

fn build_graph(
    mode: GraphMode,
    annotations: Option<&Path>,
    events: Option<&Path>,
    traces: Option<&[StudentTrace]>,
    config: &RunConfig,
    stages: u8,
) -> Result<TransitionGraph> {
    let trace_of = |id: &str| traces.and_then(|ts| ts.iter().find(|t| t.student_id == id));
    let sequences: Vec<StateSequence> = match mode {
        GraphMode::Expert => {
            let path = annotations
                .ok_or_else(|| Error::validation("expert graphs need --annotations"))?;
            let docs = parse_annotation_docs(&read(path)?)?;
            let objective_ids = objective_ids_in(&docs);
            docs.iter()
                .map(|doc| {
                    let len = match trace_of(&doc.student_id) {
                        Some(trace) => trace.len(),
                        None => doc_length(doc)?,
                    };
                    let expert = expand_annotation(doc, len, &objective_ids)?;
                    expert_state_sequence(&expert, trace_of(&doc.student_id))
                })
                .collect::<Result<_>>()?
        }
        GraphMode::System => {
            let path =
                events.ok_or_else(|| Error::validation("system graphs need --events"))?;
            let events = parse_events(&read(path)?)?;
            let ids: Vec<String> = match traces {
                Some(ts) => ts.iter().map(|t| t.student_id.clone()).collect(),
                None => {
                    let set: BTreeSet<String> =
                        events.iter().map(|e| e.student_id.clone()).collect();
                    set.into_iter().collect()
                }
            };
            ids.iter()
                .map(|id| system_state_sequence(id, &events_of(&events, id), trace_of(id)))
                .collect::<Result<_>>()?
        }
    };
    let population = sequences.len() as u64;
    let source = match mode {
        GraphMode::Expert => GraphSource::Expert,
        GraphMode::System => GraphSource::System,
    };
    let mut graph = aggregate(sequences, population, source)?;
    if stages >= 1 {
        graph = simplify_phase1(&graph, config.graph_min_fraction)?;
    }
    if stages >= 2 {
        graph = simplify_phase2(&graph);
    }
    if stages >= 3 {
        graph = simplify_phase3(&graph);
    }
    Ok(graph)
}

/// Objective ids present anywhere in the annotation set; used when no
/// objectives document accompanies an expert graph.
fn objective_ids_in(docs: &[AnnotationDoc]) -> Vec<u32> {
    let mut ids: BTreeSet<u32> = BTreeSet::new();
    for doc in docs {
        for key in doc.objectives.keys() {
            if let Ok(id) = key.parse() {
                ids.insert(id);
            }
        }
    }
    ids.into_iter().collect()
}
