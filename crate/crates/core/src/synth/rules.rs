//! Hand-written structural rules for the four exercise objectives.
//!
//! These are the ground truth the generator scripts against and an
//! independent check on anything the mined features detect. They look
//! only at tree structure, never at mined shapes.

use std::collections::BTreeSet;

use crate::model::AstNode;

/// Objective ids in ascending order.
pub const OBJECTIVE_IDS: [u32; 4] = [1, 2, 3, 4];

/// Display labels matching [`OBJECTIVE_IDS`].
pub const OBJECTIVE_LABELS: [&str; 4] = [
    "loop with a multiplied or nested repeat",
    "custom block defined and called",
    "move driven by a variable",
    "pen drawing with move, turn and size change",
];

/// Block labels owned by the language itself. Anything else is a
/// student-defined block.
pub const BUILTIN_LABELS: [&str; 12] = [
    "sprite",
    "pen down",
    "set",
    "move",
    "turn right",
    "turn left",
    "change",
    "repeat",
    "times",
    "call",
    "var",
    "literal",
];

fn any_node(root: &AstNode, pred: &impl Fn(&AstNode) -> bool) -> bool {
    let mut found = false;
    root.walk(&mut |n| found |= pred(n));
    found
}

fn has_label(root: &AstNode, label: &str) -> bool {
    any_node(root, &|n| n.label == label)
}

fn contains_descendant(node: &AstNode, label: &str) -> bool {
    node.children.iter().any(|c| c.label == label || contains_descendant(c, label))
}

/// Structural completion check for one objective.
///
/// 1. A repeat with a `times` header or a repeat nested in a repeat.
/// 2. A non-builtin block with a body, plus a call somewhere.
/// 3. A move whose amount involves a variable.
/// 4. Pen down plus move, a turn in either direction, and a size change.
pub fn objective_complete(root: &AstNode, objective_id: u32) -> bool {
    match objective_id {
        1 => any_node(root, &|n| {
            n.label == "repeat"
                && (n.children.iter().any(|c| c.label == "times")
                    || contains_descendant(n, "repeat"))
        }),
        2 => {
            any_node(root, &|n| {
                !n.children.is_empty() && !BUILTIN_LABELS.contains(&n.label.as_str())
            }) && has_label(root, "call")
        }
        3 => any_node(root, &|n| n.label == "move" && contains_descendant(n, "var")),
        4 => {
            has_label(root, "pen down")
                && has_label(root, "move")
                && (has_label(root, "turn right") || has_label(root, "turn left"))
                && has_label(root, "change")
        }
        _ => false,
    }
}

/// The set of objectives a tree completes.
pub fn truth_row(root: &AstNode) -> BTreeSet<u32> {
    OBJECTIVE_IDS
        .iter()
        .copied()
        .filter(|&id| objective_complete(root, id))
        .collect()
}
