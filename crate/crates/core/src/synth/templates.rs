//! Program-tree templates for the squiral drawing exercise.
//!
//! Two solution strategies exist: a flat unrolled drawing sequence and a
//! custom-block solution whose loop comes in two styles (a single repeat
//! with a multiplier header, or two nested repeats). Small local
//! deviations model students whose working code differs in one spot.

use std::collections::BTreeSet;

use crate::model::AstNode;

/// Name of the custom block used by block-defining solutions.
pub const CUSTOM_BLOCK: &str = "CreateASquiralOfSize";

/// Loop structure inside a custom-block solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoopStyle {
    /// `repeat` whose count is a `times` pair (12 x 4).
    Multiplied,
    /// Outer repeat 4 wrapping an inner repeat 12.
    Nested,
}

/// One-spot departures from the reference template. The drawing still
/// comes out right; only the tree shape differs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Deviation {
    #[default]
    None,
    /// Move amount written as `times(size, 1)` instead of bare `size`.
    MoveWrapped,
    /// Turn left 270 instead of turn right 90.
    TurnFlipped,
    /// Size increment 5 instead of 10.
    ChangeOff,
}

pub(crate) fn lit(v: impl ToString) -> AstNode {
    AstNode::valued("literal", v.to_string())
}

pub(crate) fn size_var() -> AstNode {
    AstNode::valued("var", "size")
}

pub(crate) fn pen_down() -> AstNode {
    AstNode::leaf("pen down")
}

pub(crate) fn move_by(amount: AstNode) -> AstNode {
    AstNode::with_children("move", vec![amount])
}

pub(crate) fn turn_right_90() -> AstNode {
    AstNode::with_children("turn right", vec![lit(90)])
}

pub(crate) fn turn_left_270() -> AstNode {
    AstNode::with_children("turn left", vec![lit(270)])
}

pub(crate) fn change_size(increment: u32) -> AstNode {
    AstNode::with_children("change", vec![size_var(), lit(increment)])
}

/// `times(12, 4)` loop header: 12 segments per side-length, 4 sides.
pub(crate) fn times_12_by_4() -> AstNode {
    AstNode::with_children("times", vec![lit(12), lit(4)])
}

fn drawing_steps(deviation: Deviation) -> Vec<AstNode> {
    let mv = match deviation {
        Deviation::MoveWrapped => {
            move_by(AstNode::with_children("times", vec![size_var(), lit(1)]))
        }
        _ => move_by(size_var()),
    };
    let turn = match deviation {
        Deviation::TurnFlipped => turn_left_270(),
        _ => turn_right_90(),
    };
    let change = match deviation {
        Deviation::ChangeOff => change_size(5),
        _ => change_size(10),
    };
    vec![mv, turn, change]
}

/// A complete custom-block solution: the block defines the drawing loop
/// and the script calls it with a start size and segment count.
pub fn custom_solution(style: LoopStyle, deviation: Deviation, start_size: u32) -> AstNode {
    let steps = drawing_steps(deviation);
    let looped = match style {
        LoopStyle::Multiplied => {
            let mut children = vec![times_12_by_4()];
            children.extend(steps);
            AstNode::with_children("repeat", children)
        }
        LoopStyle::Nested => {
            let mut inner = vec![lit(12)];
            inner.extend(steps);
            AstNode::with_children(
                "repeat",
                vec![lit(4), AstNode::with_children("repeat", inner)],
            )
        }
    };
    let define = AstNode::with_children(CUSTOM_BLOCK, vec![pen_down(), looped]);
    let mut call = AstNode::valued("call", CUSTOM_BLOCK);
    call.children = vec![lit(start_size), lit(12)];
    AstNode::with_children("sprite", vec![define, call])
}

/// A flat solution: no loop, no block definition, the drawing steps
/// unrolled three turns deep.
pub fn flat_solution() -> AstNode {
    let mut children = vec![
        pen_down(),
        AstNode::with_children("set", vec![size_var(), lit(50)]),
    ];
    for _ in 0..3 {
        children.push(move_by(size_var()));
        children.push(turn_right_90());
        children.push(change_size(10));
    }
    AstNode::with_children("sprite", children)
}

/// Builds a snapshot tree that completes exactly the given objectives.
///
/// Objective ids: 1 loop structure, 2 custom block, 3 variable-driven
/// move, 4 full drawing suite. Every subset yields a tree the expert
/// rules score as exactly that subset, so scripted traces can realize
/// arbitrary progressions including regressions.
pub fn state_tree(objectives: &BTreeSet<u32>) -> AstNode {
    let o1 = objectives.contains(&1);
    let o2 = objectives.contains(&2);
    let o3 = objectives.contains(&3);
    let o4 = objectives.contains(&4);

    let mut body = Vec::new();
    if o4 {
        body.push(pen_down());
    }
    if o1 || o3 || o4 {
        let mut loop_children = vec![if o1 { times_12_by_4() } else { lit(48) }];
        if o3 || o4 {
            loop_children.push(move_by(if o3 { size_var() } else { lit(50) }));
        }
        if o4 {
            loop_children.push(turn_right_90());
            loop_children.push(change_size(10));
        }
        body.push(AstNode::with_children("repeat", loop_children));
    }

    if o2 {
        if body.is_empty() {
            // A definition needs a body before anything else makes sense.
            body.push(AstNode::with_children("repeat", vec![lit(48)]));
        }
        let define = AstNode::with_children(CUSTOM_BLOCK, body);
        let mut call = AstNode::valued("call", CUSTOM_BLOCK);
        call.children = vec![lit(50), lit(12)];
        AstNode::with_children("sprite", vec![define, call])
    } else {
        AstNode::with_children("sprite", body)
    }
}

/// Unrolled move/turn drawing with `steps` repetitions and no size
/// changes. Completes no objective; used as filler for students who
/// ignore the objectives and draw directly.
pub fn flat_filler_tree(steps: usize) -> AstNode {
    let mut children = vec![pen_down()];
    for _ in 0..steps {
        children.push(move_by(lit(50)));
        children.push(turn_right_90());
    }
    AstNode::with_children("sprite", children)
}
