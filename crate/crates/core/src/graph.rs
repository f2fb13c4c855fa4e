//! State transition graphs over objective-completion states.
//!
//! A student's attempt becomes a walk through states named by the set of
//! objectives currently complete, from `S` (nothing yet) to a terminal:
//! `WC`/`NWC` for the expert's judgement of the submission, `END` for
//! detector-based walks. Graphs aggregate walks over a population and can
//! be simplified in three phases: drop rare edges, drop backward edges,
//! elide per-student cycles.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::engine::{EventKind, ObjectiveEvent};
use crate::error::{Error, Result};
use crate::model::annotation::{ExpertAnnotation, FinalOutcome};
use crate::model::trace::StudentTrace;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminalKind {
    Wc,
    Nwc,
    End,
}

impl TerminalKind {
    fn label(self) -> &'static str {
        match self {
            TerminalKind::Wc => "WC",
            TerminalKind::Nwc => "NWC",
            TerminalKind::End => "END",
        }
    }
}

/// A node in the walk: start, a set of complete objectives, or a terminal.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum StateNode {
    Start,
    Objectives(BTreeSet<u32>),
    Terminal(TerminalKind),
}

impl StateNode {
    /// The empty set is the start state, not a distinct node.
    pub fn objectives(set: BTreeSet<u32>) -> StateNode {
        if set.is_empty() {
            StateNode::Start
        } else {
            StateNode::Objectives(set)
        }
    }

    pub fn is_terminal(&self) -> bool {
        matches!(self, StateNode::Terminal(_))
    }

    pub fn label(&self) -> String {
        match self {
            StateNode::Start => "S".to_string(),
            StateNode::Objectives(set) => set.iter().map(|id| id.to_string()).collect(),
            StateNode::Terminal(kind) => kind.label().to_string(),
        }
    }
}

impl fmt::Display for StateNode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphSource {
    Expert,
    System,
}

/// One student's walk. `times` holds the arrival timestamp of each state
/// when the trace's clock is available; it always matches `states` in
/// length.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSequence {
    pub student_id: String,
    pub states: Vec<StateNode>,
    pub times: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub from: StateNode,
    pub to: StateNode,
    /// Distinct students whose walk contains this transition.
    pub weight: u64,
    /// Raw traversal count, kept for diagnostics.
    pub traversals: u64,
    pub backward: bool,
    /// Summed seconds spent on this transition, over all traversals with
    /// a known clock.
    pub total_seconds: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransitionGraph {
    pub source: GraphSource,
    pub population: u64,
    pub sequences: Vec<StateSequence>,
    pub transitions: Vec<Transition>,
    /// Minimum edge weight enforced by the rare-edge phase, if it ran.
    pub phase1_threshold: Option<u64>,
    /// Whether the backward-edge phase ran.
    pub backward_removed: bool,
}

/// An objective is lost on a backward move; terminals end the walk and
/// are never backward.
fn is_backward(from: &StateNode, to: &StateNode) -> bool {
    if to.is_terminal() {
        return false;
    }
    let from_set: &BTreeSet<u32> = match from {
        StateNode::Objectives(set) => set,
        _ => return false,
    };
    let empty = BTreeSet::new();
    let to_set = match to {
        StateNode::Objectives(set) => set,
        StateNode::Start => &empty,
        StateNode::Terminal(_) => unreachable!(),
    };
    from_set.difference(to_set).next().is_some()
}

/// Walk of the expert truth matrix: one state per snapshot, duplicates
/// collapsed, terminated by the expert's verdict on the submission.
pub fn expert_state_sequence(
    expert: &ExpertAnnotation,
    trace: Option<&StudentTrace>,
) -> Result<StateSequence> {
    let n = expert.n_snapshots();
    if n == 0 {
        return Err(Error::validation(format!(
            "student {:?} has an empty truth matrix",
            expert.student_id
        )));
    }
    if let Some(trace) = trace {
        if trace.len() != n {
            return Err(Error::validation(format!(
                "student {:?}: trace has {} snapshots but the truth matrix covers {}",
                expert.student_id,
                trace.len(),
                n
            )));
        }
    }

    let mut states = vec![StateNode::Start];
    let mut arrivals = vec![0usize];
    for pos in 0..n {
        let state = StateNode::objectives(expert.complete_set_at(pos));
        if state != *states.last().unwrap() {
            states.push(state);
            arrivals.push(pos);
        }
    }
    let terminal = match expert.final_outcome {
        FinalOutcome::Working => TerminalKind::Wc,
        FinalOutcome::NonWorking => TerminalKind::Nwc,
    };
    states.push(StateNode::Terminal(terminal));
    arrivals.push(n - 1);

    let times = trace.map(|trace| {
        let mut times: Vec<f64> = arrivals
            .iter()
            .map(|&pos| trace.timestamp_at(pos).expect("length checked"))
            .collect();
        *times.last_mut().unwrap() = trace.end_time();
        times
    });
    Ok(StateSequence { student_id: expert.student_id.clone(), states, times })
}

/// Walk of a detection event log: the complete set changes exactly at
/// event snapshots, and the walk always ends at `END`.
pub fn system_state_sequence(
    student_id: &str,
    events: &[ObjectiveEvent],
    trace: Option<&StudentTrace>,
) -> Result<StateSequence> {
    let clock: Option<BTreeMap<u64, f64>> = trace.map(|trace| {
        trace.snapshots.iter().map(|s| (s.index, s.timestamp_s)).collect()
    });

    let mut ordered: Vec<&ObjectiveEvent> = events.iter().collect();
    ordered.sort_by_key(|e| e.snapshot_index);

    let mut states = vec![StateNode::Start];
    let mut times = clock
        .as_ref()
        .map(|_| vec![trace.map(|t| t.start_time()).unwrap_or(0.0)]);

    let mut complete: BTreeSet<u32> = BTreeSet::new();
    let mut i = 0;
    while i < ordered.len() {
        let at = ordered[i].snapshot_index;
        while i < ordered.len() && ordered[i].snapshot_index == at {
            let event = ordered[i];
            match event.kind {
                EventKind::Completed | EventKind::Recompleted => complete.insert(event.objective_id),
                EventKind::Broken => complete.remove(&event.objective_id),
            };
            i += 1;
        }
        let state = StateNode::objectives(complete.clone());
        if state != *states.last().unwrap() {
            if let (Some(times), Some(clock)) = (times.as_mut(), clock.as_ref()) {
                let Some(&t) = clock.get(&at) else {
                    return Err(Error::validation(format!(
                        "student {student_id:?}: event at snapshot {at} not present in trace"
                    )));
                };
                times.push(t);
            }
            states.push(state);
        }
    }
    states.push(StateNode::Terminal(TerminalKind::End));
    if let Some(times) = times.as_mut() {
        times.push(trace.map(|t| t.end_time()).unwrap_or(0.0));
    }
    Ok(StateSequence { student_id: student_id.to_string(), states, times })
}

fn validate_sequence(seq: &StateSequence, source: GraphSource) -> Result<()> {
    let id = &seq.student_id;
    if seq.states.len() < 2 {
        return Err(Error::validation(format!("student {id:?}: walk too short")));
    }
    if seq.states[0] != StateNode::Start {
        return Err(Error::validation(format!("student {id:?}: walk must begin at S")));
    }
    let terminal_ok = match (source, seq.states.last().unwrap()) {
        (GraphSource::Expert, StateNode::Terminal(TerminalKind::Wc | TerminalKind::Nwc)) => true,
        (GraphSource::System, StateNode::Terminal(TerminalKind::End)) => true,
        _ => false,
    };
    if !terminal_ok {
        return Err(Error::validation(format!(
            "student {id:?}: walk must end at the terminal matching its source"
        )));
    }
    if seq.states[..seq.states.len() - 1].iter().any(|s| s.is_terminal()) {
        return Err(Error::validation(format!(
            "student {id:?}: terminal state in the middle of a walk"
        )));
    }
    if seq.states.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::validation(format!(
            "student {id:?}: consecutive duplicate states"
        )));
    }
    if let Some(times) = &seq.times {
        if times.len() != seq.states.len() {
            return Err(Error::validation(format!(
                "student {id:?}: {} arrival times for {} states",
                times.len(),
                seq.states.len()
            )));
        }
    }
    Ok(())
}

fn build_transitions(sequences: &[StateSequence]) -> Vec<Transition> {
    struct Acc {
        students: BTreeSet<String>,
        traversals: u64,
        seconds: Option<f64>,
    }
    let mut acc: BTreeMap<(StateNode, StateNode), Acc> = BTreeMap::new();
    for seq in sequences {
        for (pos, pair) in seq.states.windows(2).enumerate() {
            let key = (pair[0].clone(), pair[1].clone());
            let entry = acc.entry(key).or_insert(Acc {
                students: BTreeSet::new(),
                traversals: 0,
                seconds: None,
            });
            entry.students.insert(seq.student_id.clone());
            entry.traversals += 1;
            if let Some(times) = &seq.times {
                let spent = times[pos + 1] - times[pos];
                *entry.seconds.get_or_insert(0.0) += spent;
            }
        }
    }
    acc.into_iter()
        .map(|((from, to), acc)| {
            let backward = is_backward(&from, &to);
            Transition {
                from,
                to,
                weight: acc.students.len() as u64,
                traversals: acc.traversals,
                backward,
                total_seconds: acc.seconds,
            }
        })
        .collect()
}

/// Aggregates per-student walks into a weighted graph. Weights count
/// distinct students, not traversals.
pub fn aggregate(
    sequences: Vec<StateSequence>,
    population: u64,
    source: GraphSource,
) -> Result<TransitionGraph> {
    if sequences.is_empty() {
        return Err(Error::validation("cannot aggregate zero walks"));
    }
    let mut seen = BTreeSet::new();
    for seq in &sequences {
        validate_sequence(seq, source)?;
        if !seen.insert(seq.student_id.clone()) {
            return Err(Error::validation(format!(
                "student {:?} appears in more than one walk",
                seq.student_id
            )));
        }
    }
    if population < seen.len() as u64 {
        return Err(Error::validation(format!(
            "population {} below the {} students present",
            population,
            seen.len()
        )));
    }
    let transitions = build_transitions(&sequences);
    Ok(TransitionGraph {
        source,
        population,
        sequences,
        transitions,
        phase1_threshold: None,
        backward_removed: false,
    })
}

impl TransitionGraph {
    pub fn nodes(&self) -> BTreeSet<StateNode> {
        self.transitions
            .iter()
            .flat_map(|t| [t.from.clone(), t.to.clone()])
            .collect()
    }

    fn drop_unreachable(&mut self) {
        let mut reachable = BTreeSet::new();
        let mut queue = VecDeque::from([StateNode::Start]);
        while let Some(node) = queue.pop_front() {
            if !reachable.insert(node.clone()) {
                continue;
            }
            for t in self.transitions.iter().filter(|t| t.from == node) {
                queue.push_back(t.to.clone());
            }
        }
        self.transitions.retain(|t| reachable.contains(&t.from));
    }

    fn apply_weight_floor(&mut self, threshold: u64) {
        self.transitions.retain(|t| t.weight >= threshold);
        self.drop_unreachable();
        self.phase1_threshold = Some(threshold);
    }
}

/// Removes edges taken by fewer than `ceil(min_fraction * population)`
/// students, then drops whatever is no longer reachable from S.
pub fn simplify_phase1(graph: &TransitionGraph, min_fraction: f64) -> Result<TransitionGraph> {
    if !(0.0..=1.0).contains(&min_fraction) {
        return Err(Error::validation(format!(
            "min_fraction must be within [0, 1], got {min_fraction}"
        )));
    }
    // nudge below exact integer products so 0.1 * 30 still floors to 3
    let threshold = (min_fraction * graph.population as f64 - 1e-9).ceil().max(0.0) as u64;
    let mut out = graph.clone();
    out.apply_weight_floor(threshold);
    Ok(out)
}

/// Removes all backward edges.
pub fn simplify_phase2(graph: &TransitionGraph) -> TransitionGraph {
    let mut out = graph.clone();
    out.transitions.retain(|t| !t.backward);
    out.backward_removed = true;
    out
}

/// Cuts the shortest cycle `s[i..=j]` with `s[i] == s[j]` out of a walk,
/// repeatedly, preferring earlier cycles among equally short ones.
fn elide_cycles(states: &mut Vec<StateNode>, times: &mut Option<Vec<f64>>) {
    loop {
        let mut best: Option<(usize, usize)> = None;
        for i in 0..states.len() {
            for j in (i + 1)..states.len() {
                if states[i] == states[j] {
                    let better = match best {
                        None => true,
                        Some((bi, bj)) => (j - i, i) < (bj - bi, bi),
                    };
                    if better {
                        best = Some((i, j));
                    }
                    break; // later j for this i can only be longer
                }
            }
        }
        let Some((i, j)) = best else { return };
        states.drain(i + 1..=j);
        if let Some(times) = times.as_mut() {
            times.drain(i + 1..=j);
        }
    }
}

/// Elides cycles from every walk, re-aggregates, and re-applies whatever
/// earlier simplification phases already enforced.
pub fn simplify_phase3(graph: &TransitionGraph) -> TransitionGraph {
    let mut sequences = graph.sequences.clone();
    for seq in &mut sequences {
        elide_cycles(&mut seq.states, &mut seq.times);
    }
    let transitions = build_transitions(&sequences);
    let mut out = TransitionGraph {
        source: graph.source,
        population: graph.population,
        sequences,
        transitions,
        phase1_threshold: None,
        backward_removed: graph.backward_removed,
    };
    if out.backward_removed {
        out.transitions.retain(|t| !t.backward);
    }
    if let Some(threshold) = graph.phase1_threshold {
        out.apply_weight_floor(threshold);
    }
    out
}

/// Groups identical walks and returns those at least `min_count` strong,
/// most frequent first.
pub fn frequent_paths(graph: &TransitionGraph, min_count: u64) -> Vec<(Vec<StateNode>, u64)> {
    let mut counts: BTreeMap<Vec<StateNode>, u64> = BTreeMap::new();
    for seq in &graph.sequences {
        *counts.entry(seq.states.clone()).or_insert(0) += 1;
    }
    let mut paths: Vec<(Vec<StateNode>, u64)> = counts
        .into_iter()
        .filter(|&(_, count)| count >= min_count)
        .collect();
    paths.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| render_path(&a.0).cmp(&render_path(&b.0))));
    paths
}

pub fn render_path(path: &[StateNode]) -> String {
    path.iter().map(|s| s.label()).collect::<Vec<_>>().join("=>")
}

/// Frequent-path table as CSV: path id (source initial + rank), the
/// arrow-joined walk, and how many students took it.
pub fn paths_csv(graph: &TransitionGraph, min_count: u64) -> String {
    let prefix = match graph.source {
        GraphSource::Expert => "e",
        GraphSource::System => "s",
    };
    let mut out = String::from("path_id,path,frequency\n");
    for (rank, (path, count)) in frequent_paths(graph, min_count).iter().enumerate() {
        out.push_str(&format!("{prefix}{},{},{count}\n", rank + 1, render_path(path)));
    }
    out
}

/// Plain serializable view of a graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphDoc {
    pub source: GraphSource,
    pub population: u64,
    pub nodes: Vec<String>,
    pub edges: Vec<EdgeDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeDoc {
    pub from: String,
    pub to: String,
    pub weight: u64,
    pub traversals: u64,
    pub backward: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub total_seconds: Option<f64>,
}

impl TransitionGraph {
    pub fn to_document(&self) -> GraphDoc {
        GraphDoc {
            source: self.source,
            population: self.population,
            nodes: self.nodes().iter().map(|n| n.label()).collect(),
            edges: self
                .transitions
                .iter()
                .map(|t| EdgeDoc {
                    from: t.from.label(),
                    to: t.to.label(),
                    weight: t.weight,
                    traversals: t.traversals,
                    backward: t.backward,
                    total_seconds: t.total_seconds,
                })
                .collect(),
        }
    }
}

/// Renders the graph as DOT. Expert states are black ellipses, detector
/// states blue diamonds; backward edges are red; edge thickness scales
/// with weight and labels carry mean traversal time when known.
pub fn export_dot(graph: &TransitionGraph) -> String {
    let (shape, color) = match graph.source {
        GraphSource::Expert => ("ellipse", "black"),
        GraphSource::System => ("diamond", "blue"),
    };
    let mut out = String::from("digraph transitions {\n");
    for node in graph.nodes() {
        out.push_str(&format!(
            "  \"{}\" [shape={shape}, color={color}, fontcolor={color}];\n",
            node.label()
        ));
    }
    let w_max = graph.transitions.iter().map(|t| t.weight).max().unwrap_or(1);
    for t in &graph.transitions {
        let edge_color = if t.backward { "red" } else { color };
        let penwidth = if w_max > 1 {
            1.0 + 4.0 * (t.weight - 1) as f64 / (w_max - 1) as f64
        } else {
            1.0
        };
        let label = match t.total_seconds {
            Some(total) if t.traversals > 0 => {
                format!(", label=\"{:.1}m\"", total / t.traversals as f64 / 60.0)
            }
            _ => String::new(),
        };
        out.push_str(&format!(
            "  \"{}\" -> \"{}\" [color={edge_color}, penwidth={penwidth:.2}{label}];\n",
            t.from.label(),
            t.to.label()
        ));
    }
    out.push_str("}\n");
    out
}
