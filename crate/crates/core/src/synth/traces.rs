//! Scripted student traces with known ground truth.
//!
//! A target path lists the objective set each successive snapshot should
//! complete; the builder turns every set into a tree realizing exactly
//! that set, so the emitted expert matrix is true by construction. The
//! random seed only perturbs snapshot timing, never tree content.

use std::collections::BTreeSet;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{
    AnnotationDoc, ExpertAnnotation, FinalOutcome, ObjectiveTruth, Snapshot, StudentTrace,
};
use crate::synth::rules::OBJECTIVE_IDS;
use crate::synth::templates::{flat_filler_tree, state_tree};
use crate::synth::GeneratorConfig;

/// What to put in snapshots whose objective set is empty.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PathFiller {
    /// An empty sprite.
    #[default]
    Empty,
    /// Growing unrolled move/turn drawing that completes nothing. Models
    /// students who ignore the objectives and draw directly.
    FlatDrawing,
}

/// A scripted progression: one objective set per snapshot after the
/// initial empty one, plus the session outcome.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TargetPath {
    pub states: Vec<BTreeSet<u32>>,
    pub outcome: FinalOutcome,
    pub filler: PathFiller,
}

impl TargetPath {
    pub fn working(states: Vec<BTreeSet<u32>>) -> Self {
        TargetPath { states, outcome: FinalOutcome::Working, filler: PathFiller::Empty }
    }

    pub fn non_working(states: Vec<BTreeSet<u32>>) -> Self {
        TargetPath { states, outcome: FinalOutcome::NonWorking, filler: PathFiller::Empty }
    }

    fn validate(&self) -> Result<()> {
        for state in &self.states {
            if let Some(bad) = state.iter().find(|id| !OBJECTIVE_IDS.contains(id)) {
                return Err(Error::validation(format!(
                    "target path names unknown objective {bad}"
                )));
            }
        }
        Ok(())
    }
}

fn objective_set(ids: &[u32]) -> BTreeSet<u32> {
    ids.iter().copied().collect()
}

/// Generates one trace whose expert matrix realizes `path` exactly.
///
/// Snapshot 0 is an empty sprite at time zero; snapshot k realizes
/// `path.states[k-1]`. Gaps are 30 seconds plus seeded jitter.
pub fn generate_trace(
    config: &GeneratorConfig,
    student_id: &str,
    path: &TargetPath,
) -> Result<(StudentTrace, ExpertAnnotation)> {
    config.validate()?;
    path.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut snapshots = Vec::with_capacity(path.states.len() + 1);
    let mut t = 0.0;
    let mut filler_steps = 0;
    snapshots.push(Snapshot {
        index: 0,
        timestamp_s: t,
        root: state_tree(&BTreeSet::new()),
    });
    for (k, state) in path.states.iter().enumerate() {
        t += 30.0 + rng.gen::<f64>() * config.timestamp_jitter_s;
        let root = if state.is_empty() && path.filler == PathFiller::FlatDrawing {
            filler_steps += 3;
            flat_filler_tree(filler_steps)
        } else {
            state_tree(state)
        };
        snapshots.push(Snapshot { index: k as u64 + 1, timestamp_s: t, root });
    }

    let matrix: Vec<Vec<bool>> = std::iter::once(vec![false; OBJECTIVE_IDS.len()])
        .chain(path.states.iter().map(|state| {
            OBJECTIVE_IDS.iter().map(|id| state.contains(id)).collect()
        }))
        .collect();

    let trace = StudentTrace {
        student_id: student_id.to_string(),
        snapshots,
        submitted: true,
    };
    let annotation = ExpertAnnotation {
        student_id: student_id.to_string(),
        objective_ids: OBJECTIVE_IDS.to_vec(),
        matrix,
        final_outcome: path.outcome,
        impact_labels: BTreeSet::new(),
    };
    Ok((trace, annotation))
}

/// Collapses an expanded annotation back to the wire format, encoding
/// each objective column as a start index or explicit intervals.
pub fn to_annotation_doc(annotation: &ExpertAnnotation) -> AnnotationDoc {
    let mut objectives = std::collections::BTreeMap::new();
    let n = annotation.n_snapshots() as u64;
    for (col, id) in annotation.objective_ids.iter().enumerate() {
        let mut intervals: Vec<(u64, Option<u64>)> = Vec::new();
        let mut run_start: Option<u64> = None;
        for row in 0..n {
            let on = annotation.matrix[row as usize][col];
            match (on, run_start) {
                (true, None) => run_start = Some(row),
                (false, Some(s)) => {
                    intervals.push((s, Some(row - 1)));
                    run_start = None;
                }
                _ => {}
            }
        }
        if let Some(s) = run_start {
            intervals.push((s, None));
        }
        if intervals.is_empty() {
            continue;
        }
        let truth = match intervals.as_slice() {
            [(s, None)] => ObjectiveTruth::From(*s),
            _ => ObjectiveTruth::Intervals(intervals),
        };
        objectives.insert(id.to_string(), truth);
    }
    AnnotationDoc {
        student_id: annotation.student_id.clone(),
        final_outcome: annotation.final_outcome,
        n_snapshots: Some(n),
        impacts: if annotation.impact_labels.is_empty() {
            None
        } else {
            Some(annotation.impact_labels.iter().copied().collect())
        },
        objectives,
    }
}

/// The 27-student scripted cohort.
///
/// Six working progressions with frequencies 4, 4, 4, 3, 5, 5 plus two
/// single non-working sessions. Listed in student order; ids are
/// assigned st01.. by [`generate_traces`].
pub fn standard_cohort() -> Vec<TargetPath> {
    let mut cohort = Vec::with_capacity(27);
    let push_n = |cohort: &mut Vec<TargetPath>, n: usize, path: TargetPath| {
        for _ in 0..n {
            cohort.push(path.clone());
        }
    };

    push_n(
        &mut cohort,
        4,
        TargetPath::working(vec![
            objective_set(&[3]),
            objective_set(&[2, 3]),
            objective_set(&[2, 3, 4]),
            objective_set(&[1, 2, 3, 4]),
        ]),
    );
    push_n(
        &mut cohort,
        4,
        TargetPath::working(vec![
            objective_set(&[3]),
            objective_set(&[3, 4]),
            objective_set(&[2, 3, 4]),
            objective_set(&[1, 2, 3, 4]),
        ]),
    );
    push_n(
        &mut cohort,
        4,
        TargetPath {
            states: vec![BTreeSet::new(), BTreeSet::new()],
            outcome: FinalOutcome::Working,
            filler: PathFiller::FlatDrawing,
        },
    );
    push_n(
        &mut cohort,
        3,
        TargetPath::working(vec![
            objective_set(&[3]),
            objective_set(&[2, 3]),
            objective_set(&[2, 3, 4]),
        ]),
    );
    push_n(
        &mut cohort,
        5,
        TargetPath::working(vec![
            objective_set(&[3]),
            objective_set(&[3, 4]),
            objective_set(&[2, 3, 4]),
        ]),
    );
    push_n(
        &mut cohort,
        5,
        TargetPath::working(vec![objective_set(&[2]), objective_set(&[2, 3, 4])]),
    );
    cohort.push(TargetPath::non_working(vec![objective_set(&[2])]));
    cohort.push(TargetPath::non_working(vec![objective_set(&[3])]));
    cohort
}

/// Generates `config.n_traces` traces by cycling through the standard
/// cohort, with per-student derived seeds and ids st01, st02, ...
pub fn generate_traces(
    config: &GeneratorConfig,
) -> Result<(Vec<StudentTrace>, Vec<ExpertAnnotation>)> {
    config.validate()?;
    let cohort = standard_cohort();
    let mut traces = Vec::with_capacity(config.n_traces);
    let mut annotations = Vec::with_capacity(config.n_traces);
    for i in 0..config.n_traces {
        let path = &cohort[i % cohort.len()];
        let per_student = GeneratorConfig {
            seed: config.seed.wrapping_add(i as u64 + 1),
            ..config.clone()
        };
        let id = format!("st{:02}", i + 1);
        let (trace, annotation) = generate_trace(&per_student, &id, path)?;
        traces.push(trace);
        annotations.push(annotation);
    }
    Ok((traces, annotations))
}
