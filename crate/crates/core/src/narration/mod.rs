//! Step-by-step narration of a reduced plan tree.
//!
//! Steps are produced in postorder, so every intermediate table a step
//! reads was produced by an earlier step.

mod condition;

pub use condition::render_condition;

use std::collections::HashMap;

use serde::Serialize;

use crate::operator_tree::ReducedNode;
use crate::operator_tree::ReducedTree;
use crate::template::{TemplateSet, AGGREGATE_UNGROUPED, FALLBACK};
use crate::timing;

/// Wording used for Limit when the plan does not carry the row count.
pub const UNKNOWN_LIMIT: &str = "requested number of";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NarrationStep {
    pub step_id: usize,
    pub text: String,
    pub output_label: String,
    pub node_type: String,
    pub actual_rows: Option<u64>,
    pub actual_loops: Option<u64>,
    pub inclusive_time_ms: Option<f64>,
    pub exclusive_time_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NarrationScript {
    pub steps: Vec<NarrationStep>,
    pub final_label: String,
}

impl NarrationScript {
    pub fn step(&self, step_id: usize) -> Option<&NarrationStep> {
        step_id.checked_sub(1).and_then(|i| self.steps.get(i))
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// The numbered step list as printed for people.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for s in &self.steps {
            out.push_str(&format!("{}. {}\n", s.step_id, s.text));
        }
        out
    }
}

pub fn output_label(step_id: usize) -> String {
    format!("T{step_id}")
}

/// One step per node in postorder. Timing figures are attached when the
/// plan carries runtime statistics.
pub fn narrate(tree: &ReducedTree, templates: &TemplateSet) -> NarrationScript {
    let mut steps = Vec::with_capacity(tree.size());
    visit(&tree.root, templates, &mut steps);
    let final_label = steps
        .last()
        .map(|s: &NarrationStep| s.output_label.clone())
        .unwrap_or_default();
    NarrationScript { steps, final_label }
}

/// Narrates `node`'s subtree and returns the node's output label.
fn visit(node: &ReducedNode, templates: &TemplateSet, steps: &mut Vec<NarrationStep>) -> String {
    // Subplans are referenced from expressions, not read as inputs.
    let mut child_labels = Vec::with_capacity(node.children.len());
    for c in &node.children {
        let label = visit(c, templates, steps);
        if c.info.subplan_name.is_none() {
            child_labels.push(label);
        }
    }
    let step_id = steps.len() + 1;
    let label = output_label(step_id);
    let timing = timing::node_timing(node);
    steps.push(NarrationStep {
        step_id,
        text: template_for(node, &child_labels, &label, templates),
        output_label: label.clone(),
        node_type: node.info.node_type.clone(),
        actual_rows: node.info.actual_rows,
        actual_loops: node.info.actual_loops,
        inclusive_time_ms: timing.map(|t| t.inclusive_ms),
        exclusive_time_ms: timing.map(|t| t.exclusive_ms),
    });
    label
}

fn join_labels(labels: &[String]) -> String {
    match labels {
        [] => String::new(),
        [one] => one.clone(),
        [init @ .., last] => format!("{} and {last}", init.join(", ")),
    }
}

fn nonempty(s: Option<&String>) -> Option<String> {
    s.filter(|s| !s.is_empty()).cloned()
}

/// Instantiates the node type's template. `child_labels` are the labels of
/// the node's inputs, subplans excluded. Conditions are rendered with
/// [`render_condition`]; optional clauses drop out when their field is
/// absent.
pub fn template_for(node: &ReducedNode, child_labels: &[String], output_label: &str, templates: &TemplateSet) -> String {
    let info = &node.info;
    let mut vars: HashMap<&str, String> = HashMap::new();
    vars.insert("out", output_label.to_string());
    vars.insert("op", info.node_type.to_lowercase());
    vars.insert("n", UNKNOWN_LIMIT.to_string());
    vars.insert(
        "join_type",
        info.join_type.as_deref().unwrap_or("inner").to_lowercase(),
    );
    if let Some(rel) = nonempty(info.relation_name.as_ref()) {
        if let Some(alias) = nonempty(info.alias.as_ref()).filter(|a| *a != rel) {
            vars.insert("alias", alias);
        }
        vars.insert("rel", rel);
    } else if let Some(alias) = nonempty(info.alias.as_ref()) {
        vars.insert("alias", alias);
    }
    if let Some(cte) = nonempty(info.cte_name.as_ref()) {
        if vars.get("alias") == Some(&cte) {
            vars.remove("alias");
        }
        vars.insert("cte", cte);
    }
    if let Some(index) = nonempty(info.index_name.as_ref()) {
        vars.insert("index", index);
    }
    if let Some(strategy) = nonempty(info.strategy.as_ref()) {
        vars.insert("strategy", strategy.to_lowercase());
    }

    let rendered = |e: &Option<String>| e.as_deref().map(render_condition).filter(|s| !s.is_empty());
    let filters: Vec<String> = [rendered(&info.join_filter), rendered(&info.filter)]
        .into_iter()
        .flatten()
        .collect();
    if !filters.is_empty() {
        vars.insert("filter", filters.join(" and "));
    }
    for (name, expr) in [
        ("index_cond", &info.index_cond),
        ("recheck_cond", &info.recheck_cond),
        ("hash_cond", &info.hash_cond),
        ("merge_cond", &info.merge_cond),
    ] {
        if let Some(r) = rendered(expr) {
            vars.insert(name, r);
        }
    }

    if !info.sort_key.is_empty() {
        vars.insert("sort_key", info.sort_key.join(", "));
    }
    if !info.group_key.is_empty() {
        vars.insert("group_key", info.group_key.join(", "));
    }
    for (name, pos) in [("keys_l", 0), ("keys_r", 1)] {
        if let Some(keys) = node.child_sort_keys.get(pos).filter(|k| !k.is_empty()) {
            vars.insert(name, keys.join(", "));
        }
    }
    if let Some(first) = child_labels.first() {
        vars.insert("child", first.clone());
        vars.insert("left", first.clone());
    }
    if let Some(second) = child_labels.get(1) {
        vars.insert("right", second.clone());
    }
    if !child_labels.is_empty() {
        vars.insert("children", join_labels(child_labels));
    }

    let key = if info.node_type == "Aggregate" && info.group_key.is_empty() {
        AGGREGATE_UNGROUPED
    } else {
        info.node_type.as_str()
    };
    let template = templates
        .get(key)
        .unwrap_or_else(|| templates.required(FALLBACK));
    template.render_map(&vars)
}
