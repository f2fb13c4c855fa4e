//! Agglomerative clustering of mined items into features.
//!
//! Clusters merge greedily by occurrence-set similarity. When training
//! traces are available, each candidate merge is vetted against the
//! state resolution it would leave behind; a merge that blurs too many
//! adjacent snapshot transitions is rejected and clustering stops.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::model::ast::AstNode;
use crate::model::trace::StudentTrace;

use super::{jaccard, MergeStep, MinedItem, MiningConfig};

/// A feature: one or more mined items that must all be present.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureCluster {
    /// Members sorted by canonical id.
    pub members: Vec<MinedItem>,
    /// Solutions containing every member.
    pub occurrence: BTreeSet<String>,
}

impl FeatureCluster {
    /// Stable identifier: the smallest member id.
    pub fn id(&self) -> String {
        self.members.first().map(MinedItem::id).unwrap_or_default()
    }

    /// A feature is present when all of its members occur.
    pub fn present_in(&self, root: &AstNode) -> bool {
        self.members.iter().all(|m| m.occurs(root))
    }
}

/// Fraction of adjacent snapshot pairs whose feature-presence vectors
/// differ, pooled over all traces. Errors when there is no adjacent pair
/// to compare.
pub fn resolution(features: &[FeatureCluster], traces: &[StudentTrace]) -> Result<f64> {
    let mut pairs = 0usize;
    let mut flips = 0usize;
    for trace in traces {
        let mut prev: Option<Vec<bool>> = None;
        for snap in &trace.snapshots {
            let vector: Vec<bool> = features.iter().map(|f| f.present_in(&snap.root)).collect();
            if let Some(p) = prev {
                pairs += 1;
                if p != vector {
                    flips += 1;
                }
            }
            prev = Some(vector);
        }
    }
    if pairs == 0 {
        return Err(Error::validation(
            "resolution needs at least one adjacent snapshot pair in the training traces",
        ));
    }
    Ok(flips as f64 / pairs as f64)
}

/// Presence of every item at every snapshot, computed once up front.
struct PresenceMatrix {
    /// per trace, per snapshot, per item index
    bits: Vec<Vec<Vec<bool>>>,
    pairs: usize,
}

impl PresenceMatrix {
    fn build(items: &[(String, MinedItem, BTreeSet<String>)], traces: &[StudentTrace]) -> Self {
        let mut bits = Vec::with_capacity(traces.len());
        let mut pairs = 0usize;
        for trace in traces {
            let mut rows = Vec::with_capacity(trace.snapshots.len());
            for snap in &trace.snapshots {
                rows.push(items.iter().map(|(_, item, _)| item.occurs(&snap.root)).collect());
            }
            pairs += trace.snapshots.len().saturating_sub(1);
            bits.push(rows);
        }
        PresenceMatrix { bits, pairs }
    }

    /// Resolution of a clustering given as member index lists.
    fn resolution_of(&self, clusters: &[Vec<usize>]) -> Result<f64> {
        if self.pairs == 0 {
            return Err(Error::validation(
                "resolution needs at least one adjacent snapshot pair in the training traces",
            ));
        }
        let mut flips = 0usize;
        for rows in &self.bits {
            for pair in rows.windows(2) {
                let differs = clusters.iter().any(|members| {
                    let a = members.iter().all(|&m| pair[0][m]);
                    let b = members.iter().all(|&m| pair[1][m]);
                    a != b
                });
                if differs {
                    flips += 1;
                }
            }
        }
        Ok(flips as f64 / self.pairs as f64)
    }
}

pub struct ClusteringOutcome {
    pub features: Vec<FeatureCluster>,
    pub merge_steps: Vec<MergeStep>,
    pub stop_reason: String,
}

struct WorkCluster {
    members: Vec<usize>,
    /// smallest member id, cached for tie-breaking
    id: String,
    occurrence: BTreeSet<String>,
}

/// Greedy agglomerative clustering. Repeatedly merges the globally most
/// similar pair of clusters (occurrence Jaccard; ties broken by the
/// lexicographically smallest id pair) until the minimum feature count
/// is reached or a merge is rejected. While the cluster count exceeds
/// `max_features`, merges are forced through without the resolution
/// check; otherwise a candidate whose relative resolution drop exceeds
/// the threshold is rejected and clustering stops.
pub fn cluster_features(
    items: Vec<(String, MinedItem, BTreeSet<String>)>,
    training_traces: Option<&[StudentTrace]>,
    config: &MiningConfig,
) -> Result<ClusteringOutcome> {
    let presence = training_traces
        .filter(|t| !t.is_empty())
        .map(|traces| PresenceMatrix::build(&items, traces));
    let min_features = config.min_features.unwrap_or(1).max(1);

    let mut clusters: Vec<WorkCluster> = items
        .iter()
        .enumerate()
        .map(|(i, (id, _, set))| WorkCluster {
            members: vec![i],
            id: id.clone(),
            occurrence: set.clone(),
        })
        .collect();
    let mut merge_steps = Vec::new();
    let stop_reason;

    loop {
        if clusters.len() <= min_features {
            stop_reason = "reached the minimum feature count".to_string();
            break;
        }
        let mut best: Option<(f64, usize, usize)> = None;
        for i in 0..clusters.len() {
            for j in (i + 1)..clusters.len() {
                let sim = jaccard(&clusters[i].occurrence, &clusters[j].occurrence);
                let better = match &best {
                    None => true,
                    Some((s, bi, bj)) => {
                        sim > *s
                            || (sim == *s
                                && pair_key(&clusters[i], &clusters[j])
                                    < pair_key(&clusters[*bi], &clusters[*bj]))
                    }
                };
                if better {
                    best = Some((sim, i, j));
                }
            }
        }
        let (similarity, i, j) = best.expect("more than one cluster");
        let forced = config.max_features.is_some_and(|m| clusters.len() > m);

        let mut resolution_before = None;
        let mut resolution_after = None;
        if !forced {
            if let Some(presence) = &presence {
                let current: Vec<Vec<usize>> =
                    clusters.iter().map(|c| c.members.clone()).collect();
                let mut merged = current.clone();
                let taken = merged.remove(j);
                merged[i].extend(taken);
                let before = presence.resolution_of(&current)?;
                let after = presence.resolution_of(&merged)?;
                resolution_before = Some(before);
                resolution_after = Some(after);
                let drop = if before > 0.0 { (before - after) / before } else { 0.0 };
                if drop > config.resolution_drop_threshold {
                    stop_reason = format!(
                        "merge of {} and {} rejected: resolution would drop from {before:.4} to {after:.4}",
                        clusters[i].id, clusters[j].id
                    );
                    break;
                }
            }
        }

        let removed = clusters.remove(j);
        let target = &mut clusters[i];
        merge_steps.push(MergeStep {
            merged: vec![target.id.clone(), removed.id.clone()],
            similarity,
            resolution_before,
            resolution_after,
        });
        target.members.extend(removed.members);
        target.occurrence = target
            .occurrence
            .intersection(&removed.occurrence)
            .cloned()
            .collect();
        if removed.id < target.id {
            target.id = removed.id;
        }
    }

    let mut features: Vec<FeatureCluster> = clusters
        .into_iter()
        .map(|c| {
            let mut members: Vec<MinedItem> =
                c.members.iter().map(|&m| items[m].1.clone()).collect();
            members.sort_by_key(MinedItem::id);
            FeatureCluster { members, occurrence: c.occurrence }
        })
        .collect();
    features.sort_by_key(FeatureCluster::id);
    Ok(ClusteringOutcome { features, merge_steps, stop_reason })
}

fn pair_key<'a>(a: &'a WorkCluster, b: &'a WorkCluster) -> (&'a str, &'a str) {
    if a.id <= b.id {
        (&a.id, &b.id)
    } else {
        (&b.id, &a.id)
    }
}
