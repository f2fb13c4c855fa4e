//! Code shapes: rooted label paths paired with contiguous child windows.
//!
//! A shape has a stem of up to `p_max` labels walking down to an anchor
//! node and a window of up to `q_max` consecutive child labels under the
//! anchor. Shapes are the unit the miner counts across a corpus; their
//! canonical string form doubles as a stable identifier.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::model::ast::AstNode;

/// One label slot in a stem or window. The value is only populated when
/// the shape was extracted with value tracking on.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ShapeLabel {
    pub label: String,
    pub value: Option<String>,
}

impl ShapeLabel {
    fn of(node: &AstNode, include_values: bool) -> Self {
        ShapeLabel {
            label: node.label.clone(),
            value: if include_values { node.value.clone() } else { None },
        }
    }

    fn matches(&self, node: &AstNode, include_values: bool) -> bool {
        self.label == node.label && (!include_values || self.value == node.value)
    }
}

/// A stem-and-window shape. `stem` runs root-most first and always ends
/// at the anchor; `window` may be empty (leaf-anchored shapes).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CodeShape {
    pub stem: Vec<ShapeLabel>,
    pub window: Vec<ShapeLabel>,
    /// Whether label matching also compares node values.
    pub include_values: bool,
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for ch in s.chars() {
        if matches!(ch, '\\' | '/' | '|' | ',' | '=' | '(' | ')' | ';') {
            out.push('\\');
        }
        out.push(ch);
    }
    out
}

fn render_label(l: &ShapeLabel) -> String {
    match &l.value {
        Some(v) => format!("{}={}", escape(&l.label), escape(v)),
        None => escape(&l.label),
    }
}

impl CodeShape {
    /// Total number of labels across stem and window; the "size" used for
    /// redundancy tie-breaking.
    pub fn size(&self) -> usize {
        self.stem.len() + self.window.len()
    }

    /// Canonical identifier: `stem1/stem2/anchor|w1,w2`, each label
    /// rendered `label` or `label=value`, separators inside labels
    /// backslash-escaped.
    pub fn canonical(&self) -> String {
        let stem: Vec<String> = self.stem.iter().map(render_label).collect();
        let window: Vec<String> = self.window.iter().map(render_label).collect();
        format!("{}|{}", stem.join("/"), window.join(","))
    }

    /// Parses a canonical identifier back into a shape.
    pub fn parse(s: &str, include_values: bool) -> Result<CodeShape> {
        let (stem_part, window_part) = split_once_unescaped(s, '|')
            .ok_or_else(|| Error::parse(format!("shape id {s:?}: missing '|'")))?;
        let stem = split_labels(stem_part, '/')?;
        if stem.is_empty() {
            return Err(Error::parse(format!("shape id {s:?}: empty stem")));
        }
        let window =
            if window_part.is_empty() { Vec::new() } else { split_labels(window_part, ',')? };
        Ok(CodeShape { stem, window, include_values })
    }
}

fn split_once_unescaped(s: &str, sep: char) -> Option<(&str, &str)> {
    let bytes = s.as_bytes();
    let mut escaped = false;
    for (i, &b) in bytes.iter().enumerate() {
        if escaped {
            escaped = false;
        } else if b == b'\\' {
            escaped = true;
        } else if b == sep as u8 {
            return Some((&s[..i], &s[i + 1..]));
        }
    }
    None
}

fn split_labels(s: &str, sep: char) -> Result<Vec<ShapeLabel>> {
    let mut parts: Vec<String> = vec![String::new()];
    let mut escaped = false;
    for ch in s.chars() {
        if escaped {
            // keep the escape intact; the label=value pass unescapes once
            let part = parts.last_mut().unwrap();
            part.push('\\');
            part.push(ch);
            escaped = false;
        } else if ch == '\\' {
            escaped = true;
        } else if ch == sep {
            parts.push(String::new());
        } else {
            parts.last_mut().unwrap().push(ch);
        }
    }
    if escaped {
        return Err(Error::parse(format!("dangling escape in shape id part {s:?}")));
    }
    parts
        .into_iter()
        .map(|raw| {
            // the '=' separating label from value was left unescaped above
            let mut label = String::new();
            let mut value: Option<String> = None;
            let mut esc = false;
            for ch in raw.chars() {
                match (&mut value, esc, ch) {
                    (_, true, c) => {
                        match &mut value {
                            Some(v) => v.push(c),
                            None => label.push(c),
                        }
                        esc = false;
                    }
                    (_, false, '\\') => esc = true,
                    (None, false, '=') => value = Some(String::new()),
                    (Some(v), false, c) => v.push(c),
                    (None, false, c) => label.push(c),
                }
            }
            if label.is_empty() {
                return Err(Error::parse(format!("empty label in shape id part {raw:?}")));
            }
            Ok(ShapeLabel { label, value })
        })
        .collect()
}

/// Stem and window caps for extraction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapeConfig {
    pub p_max: usize,
    pub q_max: usize,
    pub include_values: bool,
}

impl Default for ShapeConfig {
    fn default() -> Self {
        ShapeConfig { p_max: 3, q_max: 4, include_values: true }
    }
}

/// Extracts every shape of the tree: for each node and each stem length
/// 1..=p_max (truncated at the root), the empty window when the node is a
/// leaf, and every contiguous child window of length 1..=q_max otherwise.
/// Returns distinct canonical ids mapped to their shapes.
pub fn extract_code_shapes(root: &AstNode, config: &ShapeConfig) -> Vec<CodeShape> {
    let mut out: std::collections::BTreeMap<String, CodeShape> = Default::default();
    let mut ancestors: Vec<&AstNode> = Vec::new();
    extract_rec(root, config, &mut ancestors, &mut out);
    out.into_values().collect()
}

fn extract_rec<'a>(
    node: &'a AstNode,
    config: &ShapeConfig,
    ancestors: &mut Vec<&'a AstNode>,
    out: &mut std::collections::BTreeMap<String, CodeShape>,
) {
    for p in 1..=config.p_max {
        let take = (p - 1).min(ancestors.len());
        let mut stem: Vec<ShapeLabel> = ancestors[ancestors.len() - take..]
            .iter()
            .map(|n| ShapeLabel::of(n, config.include_values))
            .collect();
        stem.push(ShapeLabel::of(node, config.include_values));
        let mut push = |window: Vec<ShapeLabel>| {
            let shape =
                CodeShape { stem: stem.clone(), window, include_values: config.include_values };
            out.entry(shape.canonical()).or_insert(shape);
        };
        if node.children.is_empty() {
            push(Vec::new());
        } else {
            for q in 1..=config.q_max.min(node.children.len()) {
                for start in 0..=(node.children.len() - q) {
                    let window = node.children[start..start + q]
                        .iter()
                        .map(|c| ShapeLabel::of(c, config.include_values))
                        .collect();
                    push(window);
                }
            }
        }
    }
    ancestors.push(node);
    for c in &node.children {
        extract_rec(c, config, ancestors, out);
    }
    ancestors.pop();
}

/// True when the shape occurs somewhere in the tree: some node matches the
/// anchor, its nearest ancestors match the rest of the stem in order, and
/// its children contain the window as a contiguous run. An empty window
/// matches at any anchor.
pub fn shape_occurs(shape: &CodeShape, root: &AstNode) -> bool {
    let mut ancestors: Vec<&AstNode> = Vec::new();
    occurs_rec(shape, root, &mut ancestors)
}

fn occurs_rec<'a>(shape: &CodeShape, node: &'a AstNode, ancestors: &mut Vec<&'a AstNode>) -> bool {
    if anchor_matches(shape, node, ancestors) {
        return true;
    }
    ancestors.push(node);
    let hit = node.children.iter().any(|c| occurs_rec(shape, c, ancestors));
    ancestors.pop();
    hit
}

fn anchor_matches(shape: &CodeShape, node: &AstNode, ancestors: &[&AstNode]) -> bool {
    let iv = shape.include_values;
    let anchor = shape.stem.last().expect("stem is never empty");
    if !anchor.matches(node, iv) {
        return false;
    }
    let above = &shape.stem[..shape.stem.len() - 1];
    if above.len() > ancestors.len() {
        return false;
    }
    let nearest = &ancestors[ancestors.len() - above.len()..];
    if !above.iter().zip(nearest).all(|(l, n)| l.matches(n, iv)) {
        return false;
    }
    if shape.window.is_empty() {
        return true;
    }
    if shape.window.len() > node.children.len() {
        return false;
    }
    (0..=node.children.len() - shape.window.len()).any(|start| {
        shape
            .window
            .iter()
            .zip(&node.children[start..])
            .all(|(l, c)| l.matches(c, iv))
    })
}

/// Canonical ids of every shape in a tree. Convenience for callers that
/// only need identifiers.
pub fn extract_shape_ids(root: &AstNode, config: &ShapeConfig) -> BTreeSet<String> {
    extract_code_shapes(root, config).iter().map(CodeShape::canonical).collect()
}
