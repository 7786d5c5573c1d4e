//! Inclusive and exclusive step times over a reduced tree.
//!
//! `Actual Total Time` is a per-loop average that already includes the
//! node's inputs, so a node's inclusive time is `total * loops` and its
//! exclusive time is what remains after subtracting its children's
//! inclusive times. Absorbed nodes contribute nothing extra: their time is
//! already inside the absorber's figure.

use serde::Serialize;

use crate::operator_tree::{NodeInfo, ReducedNode, ReducedTree};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepTiming {
    pub inclusive_ms: f64,
    pub exclusive_ms: f64,
    /// The children's inclusive time exceeded the node's own and the
    /// exclusive time was clamped to zero (parallel workers, shared CTEs).
    pub clamped: bool,
}

pub fn inclusive_ms(info: &NodeInfo) -> Option<f64> {
    Some(info.actual_total_time_ms? * info.actual_loops? as f64)
}

pub fn node_timing(node: &ReducedNode) -> Option<StepTiming> {
    let inclusive = inclusive_ms(&node.info)?;
    let mut inputs = 0.0;
    for child in &node.children {
        inputs += inclusive_ms(&child.info)?;
    }
    let raw = inclusive - inputs;
    Some(StepTiming {
        inclusive_ms: inclusive,
        exclusive_ms: raw.max(0.0),
        clamped: raw < 0.0,
    })
}

/// Timings for every node, in step (postorder) order.
pub fn all_timings(tree: &ReducedTree) -> Vec<Option<StepTiming>> {
    tree.postorder().into_iter().map(node_timing).collect()
}
