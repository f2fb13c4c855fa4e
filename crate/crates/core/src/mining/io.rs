//! On-disk form of mined features.
//!
//! The document stores feature clusters by member identifier plus the
//! decision pairs needed to rebuild them, so a replay run can load
//! features without re-mining the corpus.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::cluster::FeatureCluster;
use super::shape::CodeShape;
use super::{DecisionShape, MinedItem, MiningConfig, MiningReport, MiningResult};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureDoc {
    pub id: u32,
    pub members: Vec<String>,
    /// How members combine; only "all" is defined today.
    pub presence: String,
    /// Solutions exhibiting every member, kept for provenance.
    #[serde(default)]
    pub solutions: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecisionDoc {
    pub id: String,
    pub branches: [String; 2],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeaturesDoc {
    pub config: MiningConfig,
    pub features: Vec<FeatureDoc>,
    #[serde(default)]
    pub decisions: Vec<DecisionDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<MiningReport>,
}

pub fn to_features_doc(result: &MiningResult) -> FeaturesDoc {
    let mut decisions: BTreeMap<String, DecisionDoc> = BTreeMap::new();
    let features = result
        .features
        .iter()
        .enumerate()
        .map(|(i, cluster)| {
            let members = cluster
                .members
                .iter()
                .map(|m| {
                    if let MinedItem::Decision(d) = m {
                        decisions.entry(d.canonical()).or_insert_with(|| DecisionDoc {
                            id: d.canonical(),
                            branches: [d.first.canonical(), d.second.canonical()],
                        });
                    }
                    m.id()
                })
                .collect();
            FeatureDoc {
                id: (i + 1) as u32,
                members,
                presence: "all".to_string(),
                solutions: cluster.occurrence.iter().cloned().collect(),
            }
        })
        .collect();
    FeaturesDoc {
        config: result.config.clone(),
        features,
        decisions: decisions.into_values().collect(),
        report: Some(result.report.clone()),
    }
}

/// Rebuilds runnable feature clusters from a document. Feature ids must
/// be contiguous from 1 in order; every `either(...)` member needs an
/// entry in `decisions`.
pub fn from_features_doc(doc: &FeaturesDoc) -> Result<Vec<FeatureCluster>> {
    let include_values = doc.config.include_values;
    let decisions: BTreeMap<&str, &DecisionDoc> =
        doc.decisions.iter().map(|d| (d.id.as_str(), d)).collect();
    let mut clusters = Vec::with_capacity(doc.features.len());
    for (i, f) in doc.features.iter().enumerate() {
        if f.id != (i + 1) as u32 {
            return Err(Error::parse(format!(
                "feature ids must be contiguous from 1; found {} at position {}",
                f.id,
                i + 1
            )));
        }
        if f.presence != "all" {
            return Err(Error::parse(format!(
                "feature {}: unsupported presence {:?}",
                f.id, f.presence
            )));
        }
        if f.members.is_empty() {
            return Err(Error::parse(format!("feature {} has no members", f.id)));
        }
        let mut members = Vec::with_capacity(f.members.len());
        for id in &f.members {
            if id.starts_with("either(") {
                let d = decisions.get(id.as_str()).ok_or_else(|| {
                    Error::parse(format!("feature {}: no decision entry for {id:?}", f.id))
                })?;
                members.push(MinedItem::Decision(DecisionShape {
                    first: CodeShape::parse(&d.branches[0], include_values)?,
                    second: CodeShape::parse(&d.branches[1], include_values)?,
                }));
            } else {
                members.push(MinedItem::Shape(CodeShape::parse(id, include_values)?));
            }
        }
        clusters.push(FeatureCluster {
            members,
            occurrence: f.solutions.iter().cloned().collect(),
        });
    }
    Ok(clusters)
}

pub fn serialize_features_doc(doc: &FeaturesDoc) -> String {
    let mut s = serde_json::to_string_pretty(doc).expect("features doc serializes");
    s.push('\n');
    s
}

pub fn parse_features_doc(input: &str) -> Result<FeaturesDoc> {
    serde_json::from_str(input).map_err(|e| Error::parse(format!("features doc: {e}")))
}
