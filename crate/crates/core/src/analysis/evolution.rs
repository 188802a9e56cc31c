use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use super::concept::{is_pure, leaf_concept, Concept};
use super::tree::DialogTree;
use crate::world::{Task, TASKS};

/// A node of one task's dialog tree: the task and a path prefix of length
/// 1 to 4. Nodes are per task because a concept fixes the task.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NodeId {
    pub task: Task,
    pub prefix: Vec<u16>,
}

impl NodeId {
    pub fn is_leaf(&self) -> bool {
        self.prefix.len() == super::TREE_DEPTH
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EvolutionRecord {
    pub node: NodeId,
    /// Concept of the node in the final tree.
    pub concept: Concept,
    /// Earliest checkpoint index from which the node stays pure.
    pub checkpoint: usize,
}

/// For every occupied node of `final_tree`, the earliest checkpoint from
/// which the node is pure with respect to its final concept at that and
/// every later checkpoint. Nodes impure at the last checkpoint get no record.
pub fn backtrack_evolution(checkpoints: &[DialogTree], final_tree: &DialogTree) -> Vec<EvolutionRecord> {
    let mut records = Vec::new();
    for task in TASKS {
        let mut nodes: BTreeSet<Vec<u16>> = BTreeSet::new();
        for (path, tuples) in final_tree.occupied_leaves() {
            if tuples.iter().any(|e| e.1 == task) {
                for depth in 1..=path.len() {
                    nodes.insert(path[..depth].to_vec());
                }
            }
        }
        for prefix in nodes {
            let Some(concept) = leaf_concept(&final_tree.subtree_for_task(&prefix, task)) else {
                continue;
            };
            let pure_at = |tree: &DialogTree| is_pure(&tree.subtree_for_task(&prefix, task), &concept);
            let stays_pure = checkpoints.iter().rev().take_while(|t| pure_at(t)).count();
            if stays_pure == 0 {
                continue;
            }
            records.push(EvolutionRecord {
                node: NodeId { task, prefix },
                concept,
                checkpoint: checkpoints.len() - stays_pure,
            });
        }
    }
    records.sort_by(|a, b| (a.checkpoint, &a.node).cmp(&(b.checkpoint, &b.node)));
    records
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TimelinePoint {
    pub checkpoint: usize,
    /// Nodes grounded at or before this checkpoint.
    pub grounded: usize,
    pub accuracy: f64,
}

/// Cumulative grounded-node count next to the accuracy at each checkpoint.
pub fn grounding_timeline(records: &[EvolutionRecord], accuracies: &[f64]) -> Vec<TimelinePoint> {
    accuracies
        .iter()
        .enumerate()
        .map(|(k, &accuracy)| TimelinePoint {
            checkpoint: k,
            grounded: records.iter().filter(|r| r.checkpoint <= k).count(),
            accuracy,
        })
        .collect()
}

/// Pearson correlation; `None` if either series is constant or lengths differ.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / crate::numcore::math::sqrt(sxx * syy))
}
