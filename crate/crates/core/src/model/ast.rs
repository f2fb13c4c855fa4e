//! Abstract syntax trees for block-based programs.
//!
//! A node is a label, an optional value (literal text, identifier, block
//! name) and an ordered child list. Trees arrive as JSON documents and
//! round-trip byte-identically through [`serialize_ast`] once parsed.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One node of a program tree. Child order is significant.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AstNode {
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<AstNode>,
}

impl AstNode {
    pub fn leaf(label: impl Into<String>) -> Self {
        AstNode { label: label.into(), value: None, children: Vec::new() }
    }

    pub fn valued(label: impl Into<String>, value: impl Into<String>) -> Self {
        AstNode { label: label.into(), value: Some(value.into()), children: Vec::new() }
    }

    pub fn with_children(label: impl Into<String>, children: Vec<AstNode>) -> Self {
        AstNode { label: label.into(), value: None, children }
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    /// Number of nodes in the subtree rooted here, including the root.
    pub fn node_count(&self) -> usize {
        1 + self.children.iter().map(AstNode::node_count).sum::<usize>()
    }

    /// Depth-first preorder walk over all nodes.
    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a AstNode)) {
        f(self);
        for c in &self.children {
            c.walk(f);
        }
    }

    fn validate(&self, path: &str) -> Result<()> {
        if self.label.is_empty() {
            return Err(Error::validation(format!("empty node label at {path}")));
        }
        for (i, c) in self.children.iter().enumerate() {
            c.validate(&format!("{path}/{}[{i}]", c.label))?;
        }
        Ok(())
    }
}

/// Parses a tree document. Rejects documents that do not match the schema
/// (wrong types, unknown fields, children given as anything but an array)
/// and trees with empty labels.
pub fn parse_ast(text: &str) -> Result<AstNode> {
    let node: AstNode =
        serde_json::from_str(text).map_err(|e| Error::parse(format!("tree document: {e}")))?;
    node.validate(&node.label.clone())?;
    Ok(node)
}

/// Canonical serialization: compact JSON, fields in label/value/children
/// order, absent value and empty child list omitted.
pub fn serialize_ast(node: &AstNode) -> String {
    serde_json::to_string(node).expect("tree serialization cannot fail")
}

/// Structural equality on label, value and ordered children.
pub fn ast_equal(a: &AstNode, b: &AstNode) -> bool {
    a == b
}

/// Rewrites identifier values to `var_0`, `var_1`, ... in first-use
/// (preorder) order. A value counts as an identifier when it does not
/// parse as a number. Ingestion option, off by default.
pub fn anonymize_identifiers(node: &AstNode) -> AstNode {
    let mut names: Vec<String> = Vec::new();
    fn rewrite(node: &AstNode, names: &mut Vec<String>) -> AstNode {
        let value = node.value.as_ref().map(|v| {
            if v.parse::<f64>().is_ok() {
                v.clone()
            } else {
                let idx = match names.iter().position(|n| n == v) {
                    Some(i) => i,
                    None => {
                        names.push(v.clone());
                        names.len() - 1
                    }
                };
                format!("var_{idx}")
            }
        });
        AstNode {
            label: node.label.clone(),
            value,
            children: node.children.iter().map(|c| rewrite(c, names)).collect(),
        }
    }
    rewrite(node, &mut names)
}
