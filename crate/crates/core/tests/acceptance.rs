//! Acceptance suite: one test per shipping criterion, each ending in a
//! single printed summary line. Tolerances are pinned as constants next
//! to the assertions that use them.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use common::oracle::{assert_stages_match, config_variant, random_corpus};
use feedmine::engine::{replay, serialize_events, EventKind, ObjectiveEvent, ObjectiveSpec};
use feedmine::graph::{
    aggregate, expert_state_sequence, export_dot, frequent_paths, paths_csv, simplify_phase1,
    simplify_phase2, simplify_phase3, GraphSource, StateNode, StateSequence, TerminalKind,
    TransitionGraph,
};
use feedmine::metrics::{
    classify_detection, detection_records, impact_tables, ConfusionCounts, DetectionRecord,
    DetectionSummary, DetectionType, ImpactLinks,
};
use feedmine::mining::{
    dedupe_redundant, filter_by_support, jaccard, CodeShape, FeatureCluster, MinedItem,
    MiningConfig, OccurrenceIndex,
};
use feedmine::model::{
    AstNode, ExpertAnnotation, FinalOutcome, ImpactType, Snapshot, StudentTrace,
};
use feedmine::phases::{active_idle, segment_phases, time_budget};
use feedmine::pipeline::{run_report, PipelineConfig};
use feedmine::synth::{
    generate_corpus, generate_traces, standard_probes, to_annotation_doc, GeneratorConfig,
};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

const SWEEP_CORPORA: u64 = 120;
const SWEEP_BUDGET_S: f64 = 30.0;
const REPORT_BUDGET_S: f64 = 60.0;
const RATE_IDENTITY_EPS: f64 = 1e-12;
const ACCURACY_EPS: f64 = 1e-6;
const PERCENT_EPS: f64 = 0.01;
const TILING_EPS_S: f64 = 1e-6;
const MIN_TRUE_POSITIVE_RATE: f64 = 0.95;

#[test]
fn a01_mining_stages_match_brute_force_on_randomized_corpora() {
    let started = Instant::now();
    for seed in 0..SWEEP_CORPORA {
        let corpus = random_corpus(seed);
        assert!(corpus.solutions.len() <= 10, "corpus size cap");
        assert!(corpus.solutions.iter().all(|(_, tree)| tree.node_count() <= 15), "tree size cap");
        assert_stages_match(&corpus, &config_variant(seed), &format!("seed {seed}"));
    }
    let elapsed = started.elapsed().as_secs_f64();
    assert!(elapsed < SWEEP_BUDGET_S, "oracle sweep took {elapsed:.1}s");
    println!(
        "a01 pass: {SWEEP_CORPORA} randomized corpora match the reference \
         implementation at every stage in {elapsed:.1}s"
    );
}

#[test]
fn a02_redundancy_and_support_thresholds_cut_exactly() {
    let threshold = MiningConfig::default().jaccard_dedupe_threshold;
    assert_eq!(threshold, 0.975 * 0.975);
    let ids = |n: usize| -> BTreeSet<String> { (0..n).map(|i| format!("s{i:03}")).collect() };

    let shapes: BTreeMap<String, CodeShape> = [("a|b", 2usize), ("a|b,c", 3)]
        .iter()
        .map(|(id, size)| {
            let shape = CodeShape::parse(id, true).unwrap();
            assert_eq!(shape.size(), *size);
            (id.to_string(), shape)
        })
        .collect();

    // similarity exactly 19/20 = 0.95 stays below the cut
    let pair = |small, big| {
        BTreeMap::from([("a|b".to_string(), ids(small)), ("a|b,c".to_string(), ids(big))])
    };
    assert_eq!(jaccard(&ids(19), &ids(20)), 0.95);
    let mut index = OccurrenceIndex::from_sets(pair(19, 20), 20);
    let removals = dedupe_redundant(&mut index, &shapes, threshold);
    assert!(removals.is_empty(), "0.95 must survive");
    assert_eq!(index.len(), 2);

    // similarity 135/142 = 0.9507 crosses it; the smaller shape goes
    let sim = jaccard(&ids(135), &ids(142));
    assert!(sim > threshold && sim < 0.9508);
    let mut index = OccurrenceIndex::from_sets(pair(135, 142), 142);
    let removals = dedupe_redundant(&mut index, &shapes, threshold);
    assert_eq!(removals.len(), 1);
    assert_eq!(removals[0].removed, "a|b");
    assert_eq!(removals[0].kept, "a|b,c");
    assert_eq!(index.len(), 1);

    assert_eq!(MiningConfig::default().support_threshold, 0.81);
    let item = |id: &str, n: usize| {
        (id.to_string(), MinedItem::Shape(shapes["a|b"].clone()), ids(n))
    };
    let (kept, dropped) =
        filter_by_support(vec![item("low", 80), item("high", 81)], 100, 0.81);
    assert_eq!(kept.len(), 1, "0.81 support must be kept");
    assert_eq!(kept[0].0, "high");
    assert_eq!(dropped.len(), 1, "0.80 support must be dropped");
    assert_eq!(dropped[0].id, "low");
    assert_eq!(dropped[0].support, 0.80);

    println!(
        "a02 pass: jaccard 0.95 survives and 0.9507 is removed at the {threshold:.6} cut; \
         support 0.80 dropped, 0.81 kept"
    );
}

#[test]
fn a03_scripted_trace_yields_exactly_the_expected_events() {
    let features: Vec<FeatureCluster> = (1..=4)
        .map(|k| FeatureCluster {
            members: vec![MinedItem::Shape(CodeShape::parse(&format!("m{k}|"), true).unwrap())],
            occurrence: BTreeSet::new(),
        })
        .collect();
    let objectives: Vec<ObjectiveSpec> = (1..=4)
        .map(|k| ObjectiveSpec {
            id: k,
            label: format!("objective {k}"),
            required_features: vec![k],
        })
        .collect();

    let tree = |markers: &[u32]| {
        AstNode::with_children(
            "sprite",
            markers.iter().map(|m| AstNode::leaf(format!("m{m}"))).collect(),
        )
    };
    let states: [&[u32]; 6] = [&[], &[1], &[1, 2], &[1, 2, 3], &[1, 2, 3, 4], &[1, 3, 4]];
    let trace = StudentTrace {
        student_id: "scripted".to_string(),
        snapshots: states
            .iter()
            .enumerate()
            .map(|(i, markers)| Snapshot {
                index: i as u64,
                timestamp_s: 30.0 * i as f64,
                root: tree(markers),
            })
            .collect(),
        submitted: true,
    };

    let expected = [
        (1, 1, EventKind::Completed),
        (2, 2, EventKind::Completed),
        (3, 3, EventKind::Completed),
        (4, 4, EventKind::Completed),
        (5, 2, EventKind::Broken),
    ];
    let first = replay(&trace, &features, &objectives).unwrap();
    let got: Vec<(u64, u32, EventKind)> =
        first.events.iter().map(|e| (e.snapshot_index, e.objective_id, e.kind)).collect();
    assert_eq!(got, expected);

    let again = replay(&trace, &features, &objectives).unwrap();
    assert_eq!(
        serialize_events(&first.events),
        serialize_events(&again.events),
        "two runs must serialize to identical bytes"
    );

    println!("a03 pass: the 5-edit scripted trace produces C1 C2 C3 C4 B2 bit-identically");
}

#[test]
fn a04_rate_identities_hold_and_accuracy_matches() {
    let mut rng = StdRng::seed_from_u64(11);
    for _ in 0..1000 {
        let counts = ConfusionCounts::new(
            rng.gen_range(0..400),
            rng.gen_range(0..400),
            rng.gen_range(0..400),
            rng.gen_range(0..400),
        );
        let rates = counts.rates();
        match (rates.recall, rates.false_negative_rate) {
            (Some(recall), Some(fnr)) => {
                assert!((recall + fnr - 1.0).abs() < RATE_IDENTITY_EPS, "{counts:?}");
            }
            (None, None) => assert_eq!(counts.tp + counts.fn_, 0),
            other => panic!("recall and fnr must be absent together: {other:?}"),
        }
        match (rates.true_negative_rate, rates.false_positive_rate) {
            (Some(tnr), Some(fpr)) => {
                assert!((tnr + fpr - 1.0).abs() < RATE_IDENTITY_EPS, "{counts:?}");
            }
            (None, None) => assert_eq!(counts.tn + counts.fp, 0),
            other => panic!("tnr and fpr must be absent together: {other:?}"),
        }
    }

    let accuracy = ConfusionCounts::new(10, 4, 6, 2).rates().accuracy.unwrap();
    assert!((accuracy - 0.727273).abs() < ACCURACY_EPS, "accuracy {accuracy}");
    println!(
        "a04 pass: recall+fnr and tnr+fpr sum to 1 within {RATE_IDENTITY_EPS:e} on 1000 \
         random count vectors; (10,4,6,2) gives accuracy {accuracy:.6}"
    );
}

#[test]
fn a05_impact_ratio_table_reproduces_the_reference_numbers() {
    // type counts: CD 30, CND 14, ID 14, IND 12, E 29, L 9; labelled
    // students per type chosen so the impacted ratios land on the
    // reference percentages
    let fixture: [(DetectionType, usize, usize); 6] = [
        (DetectionType::CorrectDetection, 30, 2),
        (DetectionType::CorrectNonDetection, 14, 0),
        (DetectionType::IncorrectDetection, 14, 11),
        (DetectionType::IncorrectNonDetection, 12, 3),
        (DetectionType::Early, 29, 9),
        (DetectionType::Late, 9, 3),
    ];
    let mut records = Vec::new();
    let mut impacts: BTreeMap<String, BTreeSet<ImpactType>> = BTreeMap::new();
    let mut student = 0usize;
    for &(detection, count, labelled) in &fixture {
        for i in 0..count {
            let student_id = format!("p{student:03}");
            student += 1;
            let (system_first, expert_first) = match detection {
                DetectionType::CorrectDetection => (Some(2), Some(2)),
                DetectionType::CorrectNonDetection => (None, None),
                DetectionType::IncorrectDetection => (Some(2), None),
                DetectionType::IncorrectNonDetection => (None, Some(2)),
                DetectionType::Early => (Some(1), Some(3)),
                DetectionType::Late => (Some(3), Some(1)),
            };
            if i < labelled {
                impacts.insert(student_id.clone(), BTreeSet::from([ImpactType::Its]));
            }
            records.push(DetectionRecord {
                student_id,
                objective_id: 1 + (i % 4) as u32,
                system_first,
                expert_first,
                detection,
            });
        }
    }

    let table = impact_tables(&records, &impacts, &ImpactLinks::default()).unwrap();
    let pct_of = |t: DetectionType| {
        let row = table.ratios.iter().find(|r| r.detection == t).unwrap();
        (row.count, row.impacted, row.ratio.unwrap() * 100.0)
    };
    for (t, count, impacted, pct) in [
        (DetectionType::IncorrectDetection, 14, 11, 78.57),
        (DetectionType::IncorrectNonDetection, 12, 3, 25.00),
        (DetectionType::Early, 29, 9, 31.03),
        (DetectionType::Late, 9, 3, 33.33),
    ] {
        let (got_count, got_impacted, got_pct) = pct_of(t);
        assert_eq!((got_count, got_impacted), (count, impacted), "{t}");
        assert!((got_pct - pct).abs() < PERCENT_EPS, "{t}: {got_pct:.4}% vs {pct}%");
    }
    // labels on exact detections never count as impact
    let cd = table.ratios.iter().find(|r| r.detection == DetectionType::CorrectDetection);
    assert_eq!(cd.unwrap().impacted, 0);

    let summary = DetectionSummary::from_records(&records);
    assert_eq!(summary.total(), 108);
    assert_eq!(summary.id + summary.ind, 26);
    assert_eq!(summary.early + summary.late, 38);
    let incorrect = summary.fully_incorrect_fraction().unwrap() * 100.0;
    let partial = summary.partially_correct_fraction().unwrap() * 100.0;
    assert!((incorrect - 24.07).abs() < PERCENT_EPS, "incorrect {incorrect:.4}%");
    assert!((partial - 35.19).abs() < PERCENT_EPS, "partial {partial:.4}%");

    println!(
        "a05 pass: impacted ratios 78.57/25.00/31.03/33.33% and pooled 24.07/35.19% \
         reproduced within {PERCENT_EPS} percentage points"
    );
}

#[test]
fn a06_detection_types_partition_all_timing_combinations() {
    let annotation = |first: Option<u64>| ExpertAnnotation {
        student_id: "case".to_string(),
        objective_ids: vec![1],
        matrix: (0..5).map(|i| vec![first.is_some_and(|f| i >= f)]).collect(),
        final_outcome: FinalOutcome::Working,
        impact_labels: BTreeSet::new(),
    };
    let completion = |at: u64| ObjectiveEvent {
        student_id: "case".to_string(),
        snapshot_index: at,
        objective_id: 1,
        kind: EventKind::Completed,
    };

    // six-case fixture through the real record path
    let cases: [(Option<u64>, Option<u64>, DetectionType); 6] = [
        (Some(2), Some(2), DetectionType::CorrectDetection),
        (None, None, DetectionType::CorrectNonDetection),
        (Some(1), None, DetectionType::IncorrectDetection),
        (None, Some(1), DetectionType::IncorrectNonDetection),
        (Some(1), Some(3), DetectionType::Early),
        (Some(3), Some(1), DetectionType::Late),
    ];
    for (system, expert, want) in cases {
        let events: Vec<ObjectiveEvent> = system.map(completion).into_iter().collect();
        let records = detection_records(&events, &annotation(expert));
        assert_eq!(records.len(), 1);
        assert_eq!(records[0].detection, want, "system {system:?} expert {expert:?}");
        assert_eq!(records[0].system_first, system);
        assert_eq!(records[0].expert_first, expert);
    }

    // exhaustive: every (system, expert) pair over 0..5 and absent maps
    // to exactly one type, and all six types are reached
    let domain: Vec<Option<u64>> = std::iter::once(None).chain((0..5).map(Some)).collect();
    let mut seen: BTreeSet<DetectionType> = BTreeSet::new();
    for &system in &domain {
        for &expert in &domain {
            let got = classify_detection(system, expert);
            let want = match (system, expert) {
                (None, None) => DetectionType::CorrectNonDetection,
                (Some(_), None) => DetectionType::IncorrectDetection,
                (None, Some(_)) => DetectionType::IncorrectNonDetection,
                (Some(s), Some(e)) if s == e => DetectionType::CorrectDetection,
                (Some(s), Some(e)) if s < e => DetectionType::Early,
                _ => DetectionType::Late,
            };
            assert_eq!(got, want, "system {system:?} expert {expert:?}");
            seen.insert(got);
        }
    }
    assert_eq!(seen.len(), 6, "all six detection types must be reachable");
    println!("a06 pass: 36 timing combinations partition into the six detection types");
}

fn objectives_state(ids: &[u32]) -> StateNode {
    StateNode::objectives(ids.iter().copied().collect())
}

fn walk(student: &str, states: Vec<StateNode>) -> StateSequence {
    StateSequence { student_id: student.to_string(), states, times: None }
}

fn random_walk(rng: &mut StdRng, student: usize) -> StateSequence {
    let mut states = vec![StateNode::Start];
    let mut current: BTreeSet<u32> = BTreeSet::new();
    for _ in 0..rng.gen_range(0..7) {
        let objective = rng.gen_range(1..=4u32);
        if !current.insert(objective) {
            current.remove(&objective);
        }
        states.push(StateNode::objectives(current.clone()));
    }
    let terminal =
        if rng.gen_bool(0.5) { TerminalKind::Wc } else { TerminalKind::Nwc };
    states.push(StateNode::Terminal(terminal));
    let times = rng.gen_bool(0.5).then(|| {
        let mut t = 0.0;
        states
            .iter()
            .map(|_| {
                t += rng.gen::<f64>() * 120.0 + 1.0;
                t
            })
            .collect()
    });
    StateSequence { student_id: format!("w{student:02}"), states, times }
}

#[test]
fn a07_simplification_rules_and_idempotence() {
    // shortest-cycle elision: S,3,34,S,34 becomes S,3,34
    let looped = walk(
        "loop",
        vec![
            StateNode::Start,
            objectives_state(&[3]),
            objectives_state(&[3, 4]),
            StateNode::Start,
            objectives_state(&[3, 4]),
            StateNode::Terminal(TerminalKind::Wc),
        ],
    );
    let graph = aggregate(vec![looped], 1, GraphSource::Expert).unwrap();
    let elided = simplify_phase3(&graph);
    assert_eq!(
        elided.sequences[0].states,
        vec![
            StateNode::Start,
            objectives_state(&[3]),
            objectives_state(&[3, 4]),
            StateNode::Terminal(TerminalKind::Wc),
        ]
    );

    // rare-edge cut at population 27: weight 2 goes, weight 3 stays
    let mut walks: Vec<StateSequence> = (0..25)
        .map(|i| {
            walk(
                &format!("a{i:02}"),
                vec![
                    StateNode::Start,
                    objectives_state(&[1]),
                    StateNode::Terminal(TerminalKind::Wc),
                ],
            )
        })
        .collect();
    for i in 0..2 {
        walks.push(walk(
            &format!("b{i}"),
            vec![
                StateNode::Start,
                objectives_state(&[2]),
                StateNode::Terminal(TerminalKind::Wc),
            ],
        ));
    }
    let rare = simplify_phase1(&aggregate(walks, 27, GraphSource::Expert).unwrap(), 0.1).unwrap();
    let has_edge = |g: &TransitionGraph, to: &StateNode| {
        g.transitions.iter().any(|t| t.from == StateNode::Start && t.to == *to)
    };
    assert!(!has_edge(&rare, &objectives_state(&[2])), "weight-2 edge must be cut");
    assert!(has_edge(&rare, &objectives_state(&[1])));

    let mut walks: Vec<StateSequence> = (0..24)
        .map(|i| {
            walk(
                &format!("a{i:02}"),
                vec![
                    StateNode::Start,
                    objectives_state(&[1]),
                    StateNode::Terminal(TerminalKind::Wc),
                ],
            )
        })
        .collect();
    for i in 0..3 {
        walks.push(walk(
            &format!("b{i}"),
            vec![
                StateNode::Start,
                objectives_state(&[2]),
                StateNode::Terminal(TerminalKind::Wc),
            ],
        ));
    }
    let rare = simplify_phase1(&aggregate(walks, 27, GraphSource::Expert).unwrap(), 0.1).unwrap();
    assert!(has_edge(&rare, &objectives_state(&[2])), "weight-3 edge must stay");

    // backward edges all gone after the second pass
    let dipping = walk(
        "dip",
        vec![
            StateNode::Start,
            objectives_state(&[1, 2]),
            objectives_state(&[1]),
            objectives_state(&[1, 3]),
            StateNode::Terminal(TerminalKind::Wc),
        ],
    );
    let graph = aggregate(vec![dipping], 1, GraphSource::Expert).unwrap();
    assert!(graph.transitions.iter().any(|t| t.backward));
    let forward = simplify_phase2(&graph);
    assert!(forward.transitions.iter().all(|t| !t.backward));

    // idempotence of each phase on randomized graphs
    let mut rng = StdRng::seed_from_u64(23);
    for round in 0..60 {
        let n = rng.gen_range(1..=12);
        let walks: Vec<StateSequence> =
            (0..n).map(|i| random_walk(&mut rng, round * 100 + i)).collect();
        let graph = aggregate(walks, n as u64, GraphSource::Expert).unwrap();
        let once = simplify_phase1(&graph, 0.1).unwrap();
        assert_eq!(simplify_phase1(&once, 0.1).unwrap(), once, "rare-edge pass, round {round}");
        let once = simplify_phase2(&graph);
        assert_eq!(simplify_phase2(&once), once, "backward pass, round {round}");
        let once = simplify_phase3(&graph);
        assert_eq!(simplify_phase3(&once), once, "cycle pass, round {round}");
    }

    println!(
        "a07 pass: cycle elision, the weight 2 vs 3 cut at population 27, backward \
         removal, and idempotence of all three passes on 60 random graphs"
    );
}

#[test]
fn a08_cohort_expert_paths_carry_the_expected_frequencies() {
    let config = GeneratorConfig::default();
    let (traces, annotations) = generate_traces(&config).unwrap();
    assert_eq!(traces.len(), 27);
    let walks: Vec<StateSequence> = annotations
        .iter()
        .zip(&traces)
        .map(|(a, t)| expert_state_sequence(a, Some(t)).unwrap())
        .collect();
    let graph = aggregate(walks, traces.len() as u64, GraphSource::Expert).unwrap();
    let graph = simplify_phase3(&simplify_phase2(&simplify_phase1(&graph, 0.1).unwrap()));
    let paths = frequent_paths(&graph, 3);
    let counts: Vec<u64> = paths.iter().map(|(_, c)| *c).collect();
    assert_eq!(counts, vec![5, 5, 4, 4, 4, 3], "path frequencies");
    let csv = paths_csv(&graph, 3);
    assert_eq!(csv.lines().count(), 7, "header plus six rows:\n{csv}");
    assert!(csv.lines().nth(1).unwrap().starts_with("e1,"));
    println!("a08 pass: the 27-trace cohort yields six frequent paths at counts 5 5 4 4 4 3");
}

#[test]
fn a09_phase_budgets_from_scripted_and_random_timestamps() {
    let trace_with = |timestamps: &[f64]| StudentTrace {
        student_id: "timed".to_string(),
        snapshots: timestamps
            .iter()
            .enumerate()
            .map(|(i, &t)| Snapshot {
                index: i as u64,
                timestamp_s: t,
                root: AstNode::leaf("sprite"),
            })
            .collect(),
        submitted: true,
    };
    let event = |at: u64, kind: EventKind| ObjectiveEvent {
        student_id: "timed".to_string(),
        snapshot_index: at,
        objective_id: 1,
        kind,
    };

    // worked example: completions to 20 min, churn to 30, quiet to 35
    let trace = trace_with(&[0.0, 300.0, 600.0, 900.0, 1200.0, 1500.0, 1800.0, 2100.0]);
    let events = vec![
        event(2, EventKind::Completed),
        event(4, EventKind::Completed),
        event(6, EventKind::Broken),
    ];
    let bounds = segment_phases(&trace, &events).unwrap();
    assert_eq!(bounds.width_a() / 60.0, 20.0);
    assert_eq!(bounds.width_b() / 60.0, 10.0);
    assert_eq!(bounds.width_c() / 60.0, 5.0);

    // a gap of exactly the idle threshold still counts as active
    let flat = trace_with(&[0.0, 180.0, 360.0]);
    assert_eq!(active_idle(&flat, 0.0, f64::INFINITY, 180.0), (360.0, 0.0));
    let (active, idle) = active_idle(&trace_with(&[0.0, 180.0, 541.0]), 0.0, f64::INFINITY, 180.0);
    assert_eq!((active, idle), (180.0, 361.0));

    // active plus idle across the three phases tiles every random trace
    let mut rng = StdRng::seed_from_u64(31);
    for round in 0..100 {
        let n = rng.gen_range(2..=12);
        let mut t = 0.0;
        let timestamps: Vec<f64> = (0..n)
            .map(|i| {
                if i > 0 {
                    t += rng.gen::<f64>() * 400.0 + 1.0;
                }
                t
            })
            .collect();
        let trace = trace_with(&timestamps);
        let mut events = Vec::new();
        for objective_id in 1..=4u32 {
            if rng.gen_bool(0.6) {
                events.push(ObjectiveEvent {
                    student_id: "timed".to_string(),
                    snapshot_index: rng.gen_range(0..n as u64),
                    objective_id,
                    kind: EventKind::Completed,
                });
                if rng.gen_bool(0.4) {
                    events.push(ObjectiveEvent {
                        student_id: "timed".to_string(),
                        snapshot_index: rng.gen_range(0..n as u64),
                        objective_id,
                        kind: EventKind::Broken,
                    });
                }
            }
        }
        let bounds = segment_phases(&trace, &events).unwrap();
        let budget = time_budget(&trace, &bounds, 180.0);
        let total = budget.a.active_seconds
            + budget.a.idle_seconds
            + budget.b.active_seconds
            + budget.b.idle_seconds
            + budget.c.active_seconds
            + budget.c.idle_seconds;
        let span = trace.end_time() - trace.start_time();
        assert!(
            (total - span).abs() < TILING_EPS_S,
            "round {round}: budgets {total} vs span {span}"
        );
    }

    println!(
        "a09 pass: 20/10/5 minute example, threshold-gap activity, and \
         active+idle tiling on 100 random traces within {TILING_EPS_S:e}s"
    );
}

#[test]
fn a10_generated_cohort_end_to_end_quality_and_runtime() {
    let started = Instant::now();
    let config = GeneratorConfig::default();
    let corpus = generate_corpus(&config).unwrap();
    let (traces, annotations) = generate_traces(&config).unwrap();
    assert_eq!(corpus.solutions.len(), 20);
    assert_eq!(traces.len(), 27);
    let docs: Vec<_> = annotations.iter().map(to_annotation_doc).collect();
    let output =
        run_report(&corpus, &traces, &docs, &standard_probes(), &PipelineConfig::default())
            .unwrap();
    let elapsed = started.elapsed().as_secs_f64();
    let tpr = output.true_positive_rate().unwrap();
    assert!(tpr >= MIN_TRUE_POSITIVE_RATE, "true positive rate {tpr:.4}");
    assert!(elapsed < REPORT_BUDGET_S, "report took {elapsed:.1}s");
    println!(
        "a10 pass: generate, mine, replay and evaluate reaches true positive rate \
         {tpr:.4} (>= {MIN_TRUE_POSITIVE_RATE}) in {elapsed:.2}s"
    );
}

/// Checks one exported graph against a restricted DOT grammar: a digraph
/// header, quoted node statements with a bracketed attribute list, quoted
/// edge statements whose endpoints are declared nodes, and a closing
/// brace. Returns the node labels.
fn check_dot(text: &str, want_shape: &str) -> BTreeSet<String> {
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.first().copied(), Some("digraph transitions {"));
    assert_eq!(lines.last().copied(), Some("}"));
    let mut nodes: BTreeSet<String> = BTreeSet::new();
    let mut edges: Vec<(String, String)> = Vec::new();
    let quoted = |part: &str| -> String {
        let inner = part.trim();
        assert!(
            inner.len() >= 2 && inner.starts_with('"') && inner.ends_with('"'),
            "not a quoted identifier: {part:?}"
        );
        inner[1..inner.len() - 1].to_string()
    };
    for line in &lines[1..lines.len() - 1] {
        assert!(line.starts_with("  "), "statement must be indented: {line:?}");
        let statement = line.trim();
        assert!(statement.ends_with("];"), "statement must close its attributes: {line:?}");
        let (head, attrs) = statement[..statement.len() - 2]
            .split_once(" [")
            .unwrap_or_else(|| panic!("statement needs an attribute list: {line:?}"));
        for attr in attrs.split(", ") {
            let (key, value) = attr
                .split_once('=')
                .unwrap_or_else(|| panic!("attribute must be key=value: {attr:?}"));
            assert!(!key.is_empty() && !value.is_empty(), "empty attribute part: {attr:?}");
        }
        if let Some((from, to)) = head.split_once(" -> ") {
            edges.push((quoted(from), quoted(to)));
            assert!(attrs.contains("penwidth="), "edge without width: {line:?}");
        } else {
            nodes.insert(quoted(head));
            assert!(
                attrs.contains(&format!("shape={want_shape}")),
                "node must use shape {want_shape}: {line:?}"
            );
        }
    }
    for (from, to) in &edges {
        assert!(nodes.contains(from), "edge from undeclared node {from:?}");
        assert!(nodes.contains(to), "edge to undeclared node {to:?}");
    }
    nodes
}

#[test]
fn a11_dot_exports_parse_and_keep_terminals_per_source() {
    let config = GeneratorConfig::default();
    let corpus = generate_corpus(&config).unwrap();
    let (traces, annotations) = generate_traces(&config).unwrap();
    let docs: Vec<_> = annotations.iter().map(to_annotation_doc).collect();
    let output =
        run_report(&corpus, &traces, &docs, &standard_probes(), &PipelineConfig::default())
            .unwrap();

    let expert_nodes = check_dot(&export_dot(&output.expert_graph), "ellipse");
    let system_nodes = check_dot(&export_dot(&output.system_graph), "diamond");

    let objective_like =
        |label: &String| label.chars().all(|c| c.is_ascii_digit()) && !label.is_empty();
    for label in &expert_nodes {
        assert!(
            label == "S" || label == "WC" || label == "NWC" || objective_like(label),
            "unexpected expert node {label:?}"
        );
    }
    assert!(expert_nodes.contains("WC"), "expert graph must keep its terminal");
    assert!(!expert_nodes.contains("END"));
    for label in &system_nodes {
        assert!(
            label == "S" || label == "END" || objective_like(label),
            "unexpected system node {label:?}"
        );
    }
    assert!(system_nodes.contains("END"), "system graph must keep its terminal");
    assert!(!system_nodes.contains("WC") && !system_nodes.contains("NWC"));

    println!(
        "a11 pass: both exports satisfy the restricted DOT grammar; expert nodes are \
         ellipses ending in WC/NWC, system nodes diamonds ending in END"
    );
}
