//! Brute-force reference for the mining stages, kept deliberately naive:
//! flat enumerations and quadratic scans instead of the library's index.
//! Shapes live here as plain formatted-label vectors, so agreement with
//! the library is checked purely through canonical ids and id sets.

use std::collections::{BTreeMap, BTreeSet};

use feedmine::mining::{
    build_decision_shapes, build_occurrence_index, dedupe_redundant, filter_by_support, jaccard,
    MinedItem, MiningConfig,
};
use feedmine::model::{AstNode, SolutionCorpus};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

const LABELS: [&str; 5] = ["move", "turn", "loop", "pen", "block"];

/// Random tree of up to `max_nodes` nodes, grown by attaching each new
/// node under a uniformly chosen earlier node. Labels come from a small
/// pool so shapes collide across solutions.
pub fn random_tree(rng: &mut StdRng, max_nodes: usize) -> AstNode {
    let n = rng.gen_range(1..=max_nodes);
    let mut parents: Vec<usize> = vec![0; n];
    for (i, p) in parents.iter_mut().enumerate().skip(1) {
        *p = rng.gen_range(0..i);
    }
    let mut nodes: Vec<AstNode> = (0..n)
        .map(|_| {
            let label = LABELS[rng.gen_range(0..LABELS.len())];
            if rng.gen_bool(0.5) {
                AstNode::valued(label, rng.gen_range(0..3).to_string())
            } else {
                AstNode::leaf(label)
            }
        })
        .collect();
    for i in (1..n).rev() {
        let child = nodes.remove(i);
        nodes[parents[i]].children.insert(0, child);
    }
    nodes.remove(0)
}

pub fn random_corpus(seed: u64) -> SolutionCorpus {
    let mut rng = StdRng::seed_from_u64(seed);
    let n = rng.gen_range(2..=10);
    SolutionCorpus {
        solutions: (0..n).map(|i| (format!("s{i:02}"), random_tree(&mut rng, 15))).collect(),
    }
}

/// Mining settings exercised by the sweep; varied per seed so thresholds,
/// caps and the value toggle all get coverage.
pub fn config_variant(i: u64) -> MiningConfig {
    let (p_max, q_max) = [(3, 4), (2, 2), (1, 3)][(i % 3) as usize];
    MiningConfig {
        p_max,
        q_max,
        include_values: i % 2 == 0,
        jaccard_dedupe_threshold: [0.85, 0.975 * 0.975, 0.99][((i / 3) % 3) as usize],
        support_threshold: [0.0, 0.5, 0.81][((i / 9) % 3) as usize],
        ..MiningConfig::default()
    }
}

#[derive(Debug, Clone, PartialEq)]
struct FlatShape {
    stem: Vec<String>,
    window: Vec<String>,
}

impl FlatShape {
    fn id(&self) -> String {
        format!("{}|{}", self.stem.join("/"), self.window.join(","))
    }

    fn size(&self) -> usize {
        self.stem.len() + self.window.len()
    }
}

fn fmt(node: &AstNode, include_values: bool) -> String {
    match (&node.value, include_values) {
        (Some(v), true) => format!("{}={v}", node.label),
        _ => node.label.clone(),
    }
}

/// Every node of the tree as (root-to-node label chain, child labels).
fn chains(tree: &AstNode, include_values: bool) -> Vec<(Vec<String>, Vec<String>)> {
    let mut out = Vec::new();
    let mut stack: Vec<(&AstNode, Vec<String>)> = vec![(tree, vec![fmt(tree, include_values)])];
    while let Some((node, chain)) = stack.pop() {
        out.push((
            chain.clone(),
            node.children.iter().map(|c| fmt(c, include_values)).collect(),
        ));
        for child in &node.children {
            let mut next = chain.clone();
            next.push(fmt(child, include_values));
            stack.push((child, next));
        }
    }
    out
}

fn extract(tree: &AstNode, cfg: &MiningConfig) -> BTreeMap<String, FlatShape> {
    let mut out = BTreeMap::new();
    for (chain, kids) in chains(tree, cfg.include_values) {
        for stem_len in 1..=cfg.p_max.min(chain.len()) {
            let stem: Vec<String> = chain[chain.len() - stem_len..].to_vec();
            let mut windows: Vec<Vec<String>> = Vec::new();
            if kids.is_empty() {
                windows.push(Vec::new());
            } else {
                for q in 1..=cfg.q_max.min(kids.len()) {
                    for start in 0..=(kids.len() - q) {
                        windows.push(kids[start..start + q].to_vec());
                    }
                }
            }
            for window in windows {
                let shape = FlatShape { stem: stem.clone(), window };
                out.insert(shape.id(), shape);
            }
        }
    }
    out
}

fn occurs(shape: &FlatShape, tree: &AstNode, include_values: bool) -> bool {
    chains(tree, include_values).iter().any(|(chain, kids)| {
        chain.len() >= shape.stem.len()
            && chain[chain.len() - shape.stem.len()..] == shape.stem[..]
            && (shape.window.is_empty()
                || kids.windows(shape.window.len()).any(|w| w == shape.window))
    })
}

fn overlap(a: &BTreeSet<String>, b: &BTreeSet<String>) -> usize {
    a.iter().filter(|x| b.contains(*x)).count()
}

fn oracle_jaccard(a: &BTreeSet<String>, b: &BTreeSet<String>) -> f64 {
    let union = a.union(b).count();
    if union == 0 {
        0.0
    } else {
        overlap(a, b) as f64 / union as f64
    }
}

pub struct OracleStages {
    pub occurrence: BTreeMap<String, BTreeSet<String>>,
    pub survivors: BTreeMap<String, BTreeSet<String>>,
    pub decisions: BTreeMap<String, BTreeSet<String>>,
    pub kept: BTreeMap<String, BTreeSet<String>>,
}

pub fn oracle_stages(corpus: &SolutionCorpus, cfg: &MiningConfig) -> OracleStages {
    let mut shapes: BTreeMap<String, FlatShape> = BTreeMap::new();
    for (_, tree) in &corpus.solutions {
        shapes.extend(extract(tree, cfg));
    }
    let occurrence: BTreeMap<String, BTreeSet<String>> = shapes
        .iter()
        .map(|(id, shape)| {
            let owners = corpus
                .solutions
                .iter()
                .filter(|(_, tree)| occurs(shape, tree, cfg.include_values))
                .map(|(sid, _)| sid.clone())
                .collect();
            (id.clone(), owners)
        })
        .collect();

    // redundancy pass: scan id-ordered pairs, drop the smaller shape of
    // any pair that is too similar, skipping already-dropped shapes
    let ids: Vec<&String> = occurrence.keys().collect();
    let mut alive = vec![true; ids.len()];
    for i in 0..ids.len() {
        for j in (i + 1)..ids.len() {
            if !alive[i] {
                break;
            }
            if !alive[j] {
                continue;
            }
            if oracle_jaccard(&occurrence[ids[i]], &occurrence[ids[j]])
                > cfg.jaccard_dedupe_threshold
            {
                if shapes[ids[i]].size() < shapes[ids[j]].size() {
                    alive[i] = false;
                } else {
                    alive[j] = false;
                }
            }
        }
    }
    let survivors: BTreeMap<String, BTreeSet<String>> = ids
        .iter()
        .zip(&alive)
        .filter(|(_, keep)| **keep)
        .map(|(id, _)| ((*id).clone(), occurrence[*id].clone()))
        .collect();

    // each survivor proposes a pairing with its least-overlapping peer;
    // the pair stands when the peer is strictly rarer
    let mut decisions: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    if survivors.len() >= 2 {
        for (ci, si) in &survivors {
            let (cj, sj) = survivors
                .iter()
                .filter(|(other, _)| *other != ci)
                .min_by_key(|(other, sother)| (overlap(si, sother), (*other).clone()))
                .expect("at least one other survivor");
            if sj.len() < si.len() {
                let (lo, hi) = if ci <= cj { (ci, cj) } else { (cj, ci) };
                decisions
                    .insert(format!("either({lo}; {hi})"), si.union(sj).cloned().collect());
            }
        }
    }

    let n = corpus.solutions.len() as f64;
    let kept = survivors
        .iter()
        .chain(decisions.iter())
        .filter(|(_, set)| set.len() as f64 / n >= cfg.support_threshold)
        .map(|(id, set)| (id.clone(), set.clone()))
        .collect();

    OracleStages { occurrence, survivors, decisions, kept }
}

/// Runs the library stage by stage against the oracle on one corpus and
/// panics with the offending stage on any divergence.
pub fn assert_stages_match(corpus: &SolutionCorpus, cfg: &MiningConfig, tag: &str) {
    let oracle = oracle_stages(corpus, cfg);

    let (mut index, shapes) = build_occurrence_index(corpus, cfg).expect("non-empty corpus");
    let lib_occurrence: BTreeMap<String, BTreeSet<String>> =
        index.ids().map(|id| (id.clone(), index.set(id).unwrap().clone())).collect();
    assert_eq!(lib_occurrence, oracle.occurrence, "occurrence sets diverge ({tag})");

    let ids: Vec<&String> = oracle.occurrence.keys().collect();
    for (pos, a) in ids.iter().enumerate() {
        for b in &ids[pos + 1..] {
            let lib = jaccard(&oracle.occurrence[*a], &oracle.occurrence[*b]);
            let ours = oracle_jaccard(&oracle.occurrence[*a], &oracle.occurrence[*b]);
            assert!(
                lib == ours,
                "jaccard({a}, {b}) diverges: {lib} vs {ours} ({tag})"
            );
        }
    }

    dedupe_redundant(&mut index, &shapes, cfg.jaccard_dedupe_threshold);
    let lib_survivors: BTreeMap<String, BTreeSet<String>> =
        index.ids().map(|id| (id.clone(), index.set(id).unwrap().clone())).collect();
    assert_eq!(lib_survivors, oracle.survivors, "dedupe survivors diverge ({tag})");

    let lib_decisions = build_decision_shapes(&index, &shapes);
    let lib_decision_map: BTreeMap<String, BTreeSet<String>> =
        lib_decisions.iter().map(|(id, _, set)| (id.clone(), set.clone())).collect();
    assert_eq!(lib_decision_map, oracle.decisions, "decision shapes diverge ({tag})");

    let mut items: Vec<(String, MinedItem, BTreeSet<String>)> = lib_survivors
        .iter()
        .map(|(id, set)| (id.clone(), MinedItem::Shape(shapes[id].clone()), set.clone()))
        .collect();
    items.extend(
        lib_decisions.into_iter().map(|(id, d, set)| (id, MinedItem::Decision(d), set)),
    );
    let (kept, _) = filter_by_support(items, corpus.solutions.len(), cfg.support_threshold);
    let lib_kept: BTreeMap<String, BTreeSet<String>> =
        kept.into_iter().map(|(id, _, set)| (id, set)).collect();
    assert_eq!(lib_kept, oracle.kept, "support filter diverges ({tag})");
}
