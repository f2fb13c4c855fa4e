//! Probe pairs that sort mined features into objectives.
//!
//! Mined features carry no names, so grouping them under objectives
//! needs a structural signal: for each objective, a positive tree that
//! exercises it and a negative twin with just that capability removed.
//! A feature belongs to the first objective (by id) whose positive tree
//! contains it while the negative one does not.

use serde::{Deserialize, Serialize};

use crate::engine::ObjectiveSpec;
use crate::error::{Error, Result};
use crate::mining::FeatureCluster;
use crate::model::AstNode;
use crate::synth::rules::OBJECTIVE_LABELS;
use crate::synth::templates::{
    change_size, custom_solution, lit, move_by, pen_down, size_var, times_12_by_4,
    turn_right_90, Deviation, LoopStyle,
};

/// One objective's positive/negative tree pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveProbe {
    pub id: u32,
    pub label: String,
    /// Completes the objective (and possibly others).
    pub positive: AstNode,
    /// The same program with this objective's capability removed.
    pub negative: AstNode,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProbesDoc {
    probes: Vec<ObjectiveProbe>,
}

pub fn serialize_probes(probes: &[ObjectiveProbe]) -> String {
    let doc = ProbesDoc { probes: probes.to_vec() };
    let mut text = serde_json::to_string_pretty(&doc).expect("probes serialize");
    text.push('\n');
    text
}

pub fn parse_probes(text: &str) -> Result<Vec<ObjectiveProbe>> {
    let doc: ProbesDoc = serde_json::from_str(text)
        .map_err(|e| Error::parse(format!("probes document: {e}")))?;
    if doc.probes.is_empty() {
        return Err(Error::validation("probes document lists no probes"));
    }
    Ok(doc.probes)
}

/// The four standard probes, built from the multiplied-loop reference
/// solution. Each negative keeps every node the probe is not about, so
/// shared context stays present and only the target capability flips.
pub fn standard_probes() -> Vec<ObjectiveProbe> {
    let full = custom_solution(LoopStyle::Multiplied, Deviation::None, 50);

    // Loop removed: same drawing under a plain repeat-48.
    let no_loop = {
        let mut tree = full.clone();
        let repeat = &mut tree.children[0].children[1];
        repeat.children[0] = lit(48);
        tree
    };

    // Block removed: the multiplied body sits directly in the script.
    let no_block = {
        let looped = AstNode::with_children(
            "repeat",
            vec![times_12_by_4(), move_by(size_var()), turn_right_90(), change_size(10)],
        );
        AstNode::with_children("sprite", vec![pen_down(), looped])
    };

    // Variable removed: the move stays but takes a constant.
    let constant_move = {
        let mut tree = full.clone();
        let repeat = &mut tree.children[0].children[1];
        repeat.children[1] = move_by(lit(50));
        tree
    };

    // Drawing trimmed: no turning, no size change.
    let no_drawing = {
        let mut tree = full.clone();
        let repeat = &mut tree.children[0].children[1];
        repeat.children.truncate(2);
        tree
    };

    let negatives = [no_loop, no_block, constant_move, no_drawing];
    negatives
        .into_iter()
        .enumerate()
        .map(|(i, negative)| ObjectiveProbe {
            id: i as u32 + 1,
            label: OBJECTIVE_LABELS[i].to_string(),
            positive: full.clone(),
            negative,
        })
        .collect()
}

/// Assigns every separable feature to an objective.
///
/// Probes are visited in ascending id order and each feature can be
/// claimed once, so when two probes both separate a feature the earlier
/// objective keeps it. Feature numbers are 1-based positions in the
/// feature list, matching the features document. A probe that separates
/// nothing is an error: its objective would be undetectable.
pub fn derive_objectives(
    features: &[FeatureCluster],
    probes: &[ObjectiveProbe],
) -> Result<Vec<ObjectiveSpec>> {
    let mut ordered: Vec<&ObjectiveProbe> = probes.iter().collect();
    ordered.sort_by_key(|p| p.id);
    if ordered.windows(2).any(|w| w[0].id == w[1].id) {
        return Err(Error::validation("duplicate probe id"));
    }

    let mut claimed = vec![false; features.len()];
    let mut specs = Vec::with_capacity(ordered.len());
    for probe in ordered {
        let mut required = Vec::new();
        for (i, feature) in features.iter().enumerate() {
            if !claimed[i]
                && feature.present_in(&probe.positive)
                && !feature.present_in(&probe.negative)
            {
                claimed[i] = true;
                required.push(i as u32 + 1);
            }
        }
        if required.is_empty() {
            return Err(Error::validation(format!(
                "probe {} ({}) separates no feature; the objective would never fire",
                probe.id, probe.label
            )));
        }
        specs.push(ObjectiveSpec {
            id: probe.id,
            label: probe.label.clone(),
            required_features: required,
        });
    }
    Ok(specs)
}
