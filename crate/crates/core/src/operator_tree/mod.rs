//! Curated operator trees and the reductions applied before narration:
//! Result removal, merging of non-critical nodes, and subplan resolution.

mod merge;
mod subplan;

pub use merge::{absorbs, merge_noncritical};
pub use subplan::{resolve_subplans, SubplanCatalog, SubplanEntry, SubplanResolution};

use serde::Serialize;
use serde_json::Value;

use crate::plan_ingest::{RawPlan, RawPlanNode};

pub const RESULT: &str = "Result";

/// The plan attributes a node keeps once curated. Width, parallel
/// awareness, costs and every other key are dropped.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct NodeInfo {
    pub node_type: String,
    pub relation_name: Option<String>,
    pub alias: Option<String>,
    pub index_name: Option<String>,
    pub subplan_name: Option<String>,
    pub cte_name: Option<String>,
    pub join_type: Option<String>,
    pub strategy: Option<String>,
    pub hash_cond: Option<String>,
    pub merge_cond: Option<String>,
    pub index_cond: Option<String>,
    pub recheck_cond: Option<String>,
    pub filter: Option<String>,
    /// "Join Filter": the filtering condition applied while joining.
    pub join_filter: Option<String>,
    pub sort_key: Vec<String>,
    pub group_key: Vec<String>,
    pub actual_rows: Option<u64>,
    /// Per-loop average, as printed by EXPLAIN ANALYZE.
    pub actual_total_time_ms: Option<f64>,
    pub actual_loops: Option<u64>,
    pub parent_relationship: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OperatorNode {
    #[serde(flatten)]
    pub info: NodeInfo,
    pub children: Vec<OperatorNode>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OperatorTree {
    pub root: OperatorNode,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReducedNode {
    #[serde(flatten)]
    pub info: NodeInfo,
    /// Absorbed non-critical nodes, children detached.
    pub merged_from: Vec<NodeInfo>,
    /// Merge Join only: sort keys of the Sort absorbed at each child
    /// position (empty where that input was not sorted by the join).
    pub child_sort_keys: Vec<Vec<String>>,
    pub children: Vec<ReducedNode>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReducedTree {
    pub root: ReducedNode,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum TreeError {
    #[error("unsupported plan shape: {0}")]
    UnsupportedShape(String),
}

impl TreeError {
    pub fn code(&self) -> &'static str {
        "UnsupportedShape"
    }
}

fn string_attr(node: &RawPlanNode, key: &str) -> Option<String> {
    match node.attr(key)? {
        Value::String(s) => Some(s.clone()),
        Value::Null => None,
        other => Some(other.to_string()),
    }
}

fn list_attr(node: &RawPlanNode, key: &str) -> Vec<String> {
    match node.attr(key) {
        Some(Value::Array(items)) => items
            .iter()
            .map(|v| v.as_str().map_or_else(|| v.to_string(), str::to_string))
            .collect(),
        Some(Value::String(s)) => vec![s.clone()],
        _ => Vec::new(),
    }
}

fn count_attr(node: &RawPlanNode, key: &str) -> Option<u64> {
    let v = node.attr(key)?;
    v.as_u64()
        .or_else(|| v.as_f64().filter(|f| *f >= 0.0).map(|f| f.round() as u64))
}

fn ms_attr(node: &RawPlanNode, key: &str) -> Option<f64> {
    node.attr(key)?.as_f64().filter(|f| *f >= 0.0)
}

impl NodeInfo {
    fn from_raw(node: &RawPlanNode) -> Self {
        NodeInfo {
            node_type: node.node_type.clone(),
            relation_name: string_attr(node, "Relation Name"),
            alias: string_attr(node, "Alias"),
            index_name: string_attr(node, "Index Name"),
            subplan_name: string_attr(node, "Subplan Name"),
            cte_name: string_attr(node, "CTE Name"),
            join_type: string_attr(node, "Join Type"),
            strategy: string_attr(node, "Strategy"),
            hash_cond: string_attr(node, "Hash Cond"),
            merge_cond: string_attr(node, "Merge Cond"),
            index_cond: string_attr(node, "Index Cond"),
            recheck_cond: string_attr(node, "Recheck Cond"),
            filter: string_attr(node, "Filter"),
            join_filter: string_attr(node, "Join Filter"),
            sort_key: list_attr(node, "Sort Key"),
            group_key: list_attr(node, "Group Key"),
            actual_rows: count_attr(node, "Actual Rows"),
            actual_total_time_ms: ms_attr(node, "Actual Total Time"),
            actual_loops: count_attr(node, "Actual Loops"),
            parent_relationship: string_attr(node, "Parent Relationship"),
        }
    }

    /// All expression-valued fields, for rewriting in place.
    pub(crate) fn expressions_mut(&mut self) -> [&mut Option<String>; 6] {
        [
            &mut self.hash_cond,
            &mut self.merge_cond,
            &mut self.index_cond,
            &mut self.recheck_cond,
            &mut self.filter,
            &mut self.join_filter,
        ]
    }
}

impl OperatorNode {
    fn from_raw(node: &RawPlanNode) -> Self {
        OperatorNode {
            info: NodeInfo::from_raw(node),
            children: node.children.iter().map(OperatorNode::from_raw).collect(),
        }
    }

    pub fn size(&self) -> usize {
        1 + self.children.iter().map(OperatorNode::size).sum::<usize>()
    }

    pub fn count_type(&self, node_type: &str) -> usize {
        usize::from(self.info.node_type == node_type)
            + self.children.iter().map(|c| c.count_type(node_type)).sum::<usize>()
    }
}

impl OperatorTree {
    pub fn size(&self) -> usize {
        self.root.size()
    }
}

impl ReducedNode {
    pub fn size(&self) -> usize {
        1 + self.children.iter().map(ReducedNode::size).sum::<usize>()
    }

    fn collect_postorder<'a>(&'a self, out: &mut Vec<&'a ReducedNode>) {
        for c in &self.children {
            c.collect_postorder(out);
        }
        out.push(self);
    }

    fn collect_preorder<'a>(&'a self, out: &mut Vec<&'a ReducedNode>) {
        out.push(self);
        for c in &self.children {
            c.collect_preorder(out);
        }
    }

    /// Nodes of this subtree in preorder.
    pub fn preorder(&self) -> Vec<&ReducedNode> {
        let mut out = Vec::new();
        self.collect_preorder(&mut out);
        out
    }
}

impl ReducedTree {
    pub fn size(&self) -> usize {
        self.root.size()
    }

    /// Nodes in postorder (children left to right, then parent). The k-th
    /// entry is narration step k+1.
    pub fn postorder(&self) -> Vec<&ReducedNode> {
        let mut out = Vec::new();
        self.root.collect_postorder(&mut out);
        out
    }

    pub fn merged_count(&self) -> usize {
        self.postorder().iter().map(|n| n.merged_from.len()).sum()
    }
}

/// One curated node per raw node, same shape.
pub fn build_operator_tree(raw: &RawPlan) -> OperatorTree {
    OperatorTree {
        root: OperatorNode::from_raw(&raw.root),
    }
}

/// Deletes Result nodes, splicing their children into the parent's child
/// list at the deleted node's position.
pub fn remove_result_nodes(tree: OperatorTree) -> Result<OperatorTree, TreeError> {
    let mut root = tree.root;
    while root.info.node_type == RESULT {
        match root.children.len() {
            1 => root = root.children.pop().expect("one child"),
            0 => {
                return Err(TreeError::UnsupportedShape(
                    "plan consists only of a Result node".into(),
                ))
            }
            n => {
                // A root Result that only hosts initplans next to its input:
                // the input becomes the root and adopts the initplans.
                let (mut main, subplans): (Vec<_>, Vec<_>) =
                    root.children.into_iter().partition(|c| c.info.subplan_name.is_none());
                if main.len() != 1 {
                    return Err(TreeError::UnsupportedShape(format!(
                        "root Result node has {n} children"
                    )));
                }
                root = main.pop().expect("one main child");
                root.children.extend(subplans);
            }
        }
    }
    splice_results(&mut root);
    Ok(OperatorTree { root })
}

fn splice_results(node: &mut OperatorNode) {
    let children = std::mem::take(&mut node.children);
    for child in children {
        push_without_results(child, &mut node.children);
    }
}

fn push_without_results(mut node: OperatorNode, out: &mut Vec<OperatorNode>) {
    if node.info.node_type == RESULT {
        for grandchild in node.children {
            push_without_results(grandchild, out);
        }
    } else {
        splice_results(&mut node);
        out.push(node);
    }
}
