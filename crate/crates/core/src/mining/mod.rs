//! Feature mining over solution corpora.
//!
//! Pipeline: extract shapes from every solution, index occurrences,
//! remove near-duplicate shapes (Jaccard over occurrence sets), build
//! decision shapes pairing complementary strategies, drop items below
//! the support threshold, then agglomeratively cluster the survivors
//! into features, guided by the state resolution of training traces.

pub mod cluster;
pub mod io;
pub mod shape;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ast::AstNode;
use crate::model::trace::{SolutionCorpus, StudentTrace};

pub use cluster::{cluster_features, resolution, FeatureCluster};
pub use shape::{extract_code_shapes, shape_occurs, CodeShape, ShapeConfig, ShapeLabel};

/// Tunables for the whole mining pipeline.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct MiningConfig {
    /// Maximum stem length (path of labels down to the anchor).
    pub p_max: usize,
    /// Maximum child window length.
    pub q_max: usize,
    /// Whether shape labels carry node values.
    pub include_values: bool,
    /// Occurrence-set Jaccard above which the smaller shape is redundant.
    pub jaccard_dedupe_threshold: f64,
    /// Items below this support fraction are dropped.
    pub support_threshold: f64,
    /// Relative resolution drop that stops clustering.
    pub resolution_drop_threshold: f64,
    /// Optional manual bounds on the final feature count.
    pub min_features: Option<usize>,
    pub max_features: Option<usize>,
}

impl Default for MiningConfig {
    fn default() -> Self {
        MiningConfig {
            p_max: 3,
            q_max: 4,
            include_values: true,
            jaccard_dedupe_threshold: 0.975 * 0.975,
            support_threshold: 0.81,
            resolution_drop_threshold: 0.05,
            min_features: None,
            max_features: None,
        }
    }
}

impl MiningConfig {
    pub fn shape_config(&self) -> ShapeConfig {
        ShapeConfig { p_max: self.p_max, q_max: self.q_max, include_values: self.include_values }
    }
}

/// Which solutions contain which shape, plus the corpus size.
#[derive(Debug, Clone, PartialEq)]
pub struct OccurrenceIndex {
    sets: BTreeMap<String, BTreeSet<String>>,
    corpus_size: usize,
}

impl OccurrenceIndex {
    /// Builds the index from raw occurrence sets. Exposed so callers can
    /// index synthetic sets directly in tests and tools.
    pub fn from_sets(sets: BTreeMap<String, BTreeSet<String>>, corpus_size: usize) -> Self {
        OccurrenceIndex { sets, corpus_size }
    }

    pub fn corpus_size(&self) -> usize {
        self.corpus_size
    }

    pub fn ids(&self) -> impl Iterator<Item = &String> {
        self.sets.keys()
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    pub fn set(&self, id: &str) -> Option<&BTreeSet<String>> {
        self.sets.get(id)
    }

    /// Fraction of solutions containing the shape.
    pub fn support(&self, id: &str) -> f64 {
        match self.sets.get(id) {
            Some(s) => s.len() as f64 / self.corpus_size as f64,
            None => 0.0,
        }
    }

    pub fn remove(&mut self, id: &str) -> Option<BTreeSet<String>> {
        self.sets.remove(id)
    }
}

/// Extracts every shape of every solution and records which solutions
/// contain each shape. Containment is re-checked per solution, so a shape
/// extracted from one tree still counts for trees where it merely occurs.
pub fn build_occurrence_index(
    corpus: &SolutionCorpus,
    config: &MiningConfig,
) -> Result<(OccurrenceIndex, BTreeMap<String, CodeShape>)> {
    if corpus.is_empty() {
        return Err(Error::validation("mining requires a non-empty corpus"));
    }
    let shape_config = config.shape_config();
    let mut shapes: BTreeMap<String, CodeShape> = BTreeMap::new();
    let mut per_solution: Vec<(String, BTreeSet<String>)> = Vec::new();
    for (sid, root) in &corpus.solutions {
        let mut here = BTreeSet::new();
        for shape in extract_code_shapes(root, &shape_config) {
            let id = shape.canonical();
            here.insert(id.clone());
            shapes.entry(id).or_insert(shape);
        }
        per_solution.push((sid.clone(), here));
    }
    let mut sets: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for (id, shape) in &shapes {
        let mut owners = BTreeSet::new();
        for (sid, extracted) in &per_solution {
            // extraction already proves occurrence; only re-check the rest
            if extracted.contains(id) || shape_occurs(shape, solution_root(corpus, sid)) {
                owners.insert(sid.clone());
            }
        }
        sets.insert(id.clone(), owners);
    }
    Ok((OccurrenceIndex { sets, corpus_size: corpus.len() }, shapes))
}

fn solution_root<'a>(corpus: &'a SolutionCorpus, sid: &str) -> &'a AstNode {
    &corpus
        .solutions
        .iter()
        .find(|(id, _)| id == sid)
        .expect("solution id from the same corpus")
        .1
}

/// Jaccard similarity of two occurrence sets; 0 when both are empty.
pub fn jaccard(a: &BTreeSet<String>, b: &BTreeSet<String>) -> f64 {
    let inter = a.intersection(b).count();
    let union = a.len() + b.len() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// One removal performed by the redundancy pass.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DedupeRemoval {
    pub removed: String,
    pub kept: String,
    pub jaccard: f64,
}

/// Removes the smaller shape of every pair whose occurrence Jaccard
/// strictly exceeds the threshold. Pairs are scanned in canonical id
/// order; "smaller" means fewer stem+window labels, ties resolved by
/// removing the lexicographically later id. Removals cascade: a removed
/// shape is not considered in later pairs.
pub fn dedupe_redundant(
    index: &mut OccurrenceIndex,
    shapes: &BTreeMap<String, CodeShape>,
    threshold: f64,
) -> Vec<DedupeRemoval> {
    let ids: Vec<String> = index.sets.keys().cloned().collect();
    let mut removed: BTreeSet<String> = BTreeSet::new();
    let mut log = Vec::new();
    for i in 0..ids.len() {
        if removed.contains(&ids[i]) {
            continue;
        }
        for j in (i + 1)..ids.len() {
            if removed.contains(&ids[i]) {
                break;
            }
            if removed.contains(&ids[j]) {
                continue;
            }
            let sim = jaccard(&index.sets[&ids[i]], &index.sets[&ids[j]]);
            if sim > threshold {
                let size_i = shapes[&ids[i]].size();
                let size_j = shapes[&ids[j]].size();
                // ids[i] < ids[j] lexicographically, so on equal size the
                // later id (ids[j]) is the one that goes
                let loser = if size_i < size_j { i } else { j };
                let winner = if loser == i { j } else { i };
                removed.insert(ids[loser].clone());
                log.push(DedupeRemoval {
                    removed: ids[loser].clone(),
                    kept: ids[winner].clone(),
                    jaccard: sim,
                });
            }
        }
    }
    for id in &removed {
        index.sets.remove(id);
    }
    log
}

/// A decision shape: either branch counts as presence. Pairs a shape with
/// the alternative-strategy shape it least overlaps with.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DecisionShape {
    pub first: CodeShape,
    pub second: CodeShape,
}

impl DecisionShape {
    pub fn id_for(a: &str, b: &str) -> String {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        format!("either({lo}; {hi})")
    }

    pub fn canonical(&self) -> String {
        DecisionShape::id_for(&self.first.canonical(), &self.second.canonical())
    }
}

/// For every shape, finds the other shape with minimal co-occurrence
/// (ties broken toward the smallest canonical id) and emits a decision
/// when that partner has strictly lower support. The decision's
/// occurrence set is the union of both branches. Duplicate unordered
/// pairs are emitted once; fewer than two shapes yield nothing.
pub fn build_decision_shapes(
    index: &OccurrenceIndex,
    shapes: &BTreeMap<String, CodeShape>,
) -> Vec<(String, DecisionShape, BTreeSet<String>)> {
    let ids: Vec<&String> = index.sets.keys().collect();
    if ids.len() < 2 {
        return Vec::new();
    }
    let mut out: BTreeMap<String, (DecisionShape, BTreeSet<String>)> = BTreeMap::new();
    for ci in &ids {
        let si = &index.sets[*ci];
        let mut best: Option<(usize, &String)> = None;
        for cj in &ids {
            if ci == cj {
                continue;
            }
            let overlap = si.intersection(&index.sets[*cj]).count();
            let better = match best {
                None => true,
                Some((o, id)) => overlap < o || (overlap == o && *cj < id),
            };
            if better {
                best = Some((overlap, cj));
            }
        }
        let (_, cj) = best.expect("at least one other shape");
        let sj = &index.sets[cj];
        if sj.len() < si.len() {
            let id = DecisionShape::id_for(ci, cj);
            let (lo, hi): (&str, &str) = if *ci <= cj { (ci, cj) } else { (cj, ci) };
            out.entry(id).or_insert_with(|| {
                (
                    DecisionShape { first: shapes[lo].clone(), second: shapes[hi].clone() },
                    si.union(sj).cloned().collect(),
                )
            });
        }
    }
    out.into_iter().map(|(id, (d, s))| (id, d, s)).collect()
}

/// A mined item: a plain shape or a decision between two shapes.
#[derive(Debug, Clone, PartialEq)]
pub enum MinedItem {
    Shape(CodeShape),
    Decision(DecisionShape),
}

impl MinedItem {
    pub fn id(&self) -> String {
        match self {
            MinedItem::Shape(s) => s.canonical(),
            MinedItem::Decision(d) => d.canonical(),
        }
    }

    /// Presence of the item in a tree; decisions fire on either branch.
    pub fn occurs(&self, root: &AstNode) -> bool {
        match self {
            MinedItem::Shape(s) => shape_occurs(s, root),
            MinedItem::Decision(d) => shape_occurs(&d.first, root) || shape_occurs(&d.second, root),
        }
    }
}

/// An item dropped by the support filter.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SupportRemoval {
    pub id: String,
    pub support: f64,
}

/// Keeps items whose support is at least the threshold (strictly below is
/// removed). Returns survivors in canonical id order with their sets.
pub fn filter_by_support(
    items: Vec<(String, MinedItem, BTreeSet<String>)>,
    corpus_size: usize,
    threshold: f64,
) -> (Vec<(String, MinedItem, BTreeSet<String>)>, Vec<SupportRemoval>) {
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for (id, item, set) in items {
        let support = set.len() as f64 / corpus_size as f64;
        if support < threshold {
            dropped.push(SupportRemoval { id, support });
        } else {
            kept.push((id, item, set));
        }
    }
    (kept, dropped)
}

/// One committed clustering merge, for the provenance report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MergeStep {
    pub merged: Vec<String>,
    pub similarity: f64,
    pub resolution_before: Option<f64>,
    pub resolution_after: Option<f64>,
}

/// Full provenance of a mining run: every stage count and every removal
/// with its cause.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MiningReport {
    pub corpus_size: usize,
    pub extracted_shapes: usize,
    pub dedupe_removals: Vec<DedupeRemoval>,
    pub shapes_after_dedupe: usize,
    pub decisions_built: usize,
    pub support_removals: Vec<SupportRemoval>,
    pub items_after_support: usize,
    pub merge_steps: Vec<MergeStep>,
    pub stop_reason: String,
    pub final_feature_count: usize,
}

/// Mining output: features ready for the detection engine plus the
/// report.
#[derive(Debug, Clone)]
pub struct MiningResult {
    pub config: MiningConfig,
    pub features: Vec<FeatureCluster>,
    pub report: MiningReport,
}

/// Runs the whole pipeline. Training traces, when given, let the
/// clustering stage watch feature-state resolution; without them only
/// the count bounds stop merging.
pub fn mine(
    corpus: &SolutionCorpus,
    training_traces: Option<&[StudentTrace]>,
    config: &MiningConfig,
) -> Result<MiningResult> {
    let (mut index, shapes) = build_occurrence_index(corpus, config)?;
    let extracted_shapes = index.len();
    let dedupe_removals = dedupe_redundant(&mut index, &shapes, config.jaccard_dedupe_threshold);
    let shapes_after_dedupe = index.len();

    let decisions = build_decision_shapes(&index, &shapes);
    let decisions_built = decisions.len();

    let mut items: Vec<(String, MinedItem, BTreeSet<String>)> = index
        .sets
        .iter()
        .map(|(id, set)| (id.clone(), MinedItem::Shape(shapes[id].clone()), set.clone()))
        .collect();
    items.extend(
        decisions
            .into_iter()
            .map(|(id, d, set)| (id, MinedItem::Decision(d), set)),
    );
    items.sort_by(|a, b| a.0.cmp(&b.0));

    let (kept, support_removals) =
        filter_by_support(items, corpus.len(), config.support_threshold);
    let items_after_support = kept.len();
    if kept.is_empty() {
        return Err(Error::validation(
            "no mined item reaches the support threshold; the corpus is too diverse or too small",
        ));
    }

    let clustering = cluster::cluster_features(kept, training_traces, config)?;

    let report = MiningReport {
        corpus_size: corpus.len(),
        extracted_shapes,
        dedupe_removals,
        shapes_after_dedupe,
        decisions_built,
        support_removals,
        items_after_support,
        merge_steps: clustering.merge_steps,
        stop_reason: clustering.stop_reason,
        final_feature_count: clustering.features.len(),
    };
    Ok(MiningResult { config: config.clone(), features: clustering.features, report })
}
