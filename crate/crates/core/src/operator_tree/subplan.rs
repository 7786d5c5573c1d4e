use std::sync::LazyLock;

use indexmap::IndexMap;
use regex::{Captures, Regex};
use serde::Serialize;

use super::{ReducedNode, ReducedTree};

/// Stand-in for a subplan whose subtree scans no base relation.
pub const NO_RELATION: &str = "(subquery)";

// PostgreSQL 16+ prints initplan outputs as "(InitPlan 1).col1".
static COLUMN_REF: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\((?:hashed )?((?:SubPlan|InitPlan) \d+)\)\.col\d+").unwrap());
static LABEL_REF: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?:hashed )?\b((?:SubPlan|InitPlan) \d+)\b").unwrap());
static PARAM_REF: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\$\d+\b").unwrap());
static RETURNS: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"returns ((?:\$\d+,?\s*)+)").unwrap());
static LABEL_PREFIX: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^((?:SubPlan|InitPlan) \d+|CTE \S+)").unwrap());

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubplanEntry {
    /// The "Subplan Name" exactly as printed, e.g. "InitPlan 1 (returns $0)".
    pub name: String,
    /// The reference label used in expressions, e.g. "InitPlan 1".
    pub label: String,
    /// Positional parameters bound by `returns $k`.
    pub params: Vec<String>,
    /// Base relations scanned inside the subplan, first-appearance order.
    pub relations: Vec<String>,
}

impl SubplanEntry {
    pub fn phrase(&self) -> String {
        format!("the result of the subquery on {}", self.relations.join(", "))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SubplanCatalog {
    pub entries: IndexMap<String, SubplanEntry>,
}

impl SubplanCatalog {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn by_label(&self, label: &str) -> Option<&SubplanEntry> {
        self.entries.values().find(|e| e.label == label)
    }

    pub fn by_param(&self, param: &str) -> Option<&SubplanEntry> {
        self.entries.values().find(|e| e.params.iter().any(|p| p == param))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubplanResolution {
    pub tree: ReducedTree,
    pub catalog: SubplanCatalog,
    /// References that could not be resolved and were left verbatim.
    pub warnings: Vec<String>,
}

/// Builds the subplan catalog and rewrites every expression so subplan
/// labels and their `$k` parameters read as the relations they query.
pub fn resolve_subplans(tree: ReducedTree) -> SubplanResolution {
    let catalog = build_catalog(&tree);
    let mut warnings = Vec::new();
    let mut tree = tree;
    rewrite(&mut tree.root, &catalog, &mut warnings);
    SubplanResolution { tree, catalog, warnings }
}

fn build_catalog(tree: &ReducedTree) -> SubplanCatalog {
    let mut catalog = SubplanCatalog::default();
    for node in tree.root.preorder() {
        let Some(name) = &node.info.subplan_name else { continue };
        let label = LABEL_PREFIX
            .captures(name)
            .map_or_else(|| name.clone(), |c| c[1].to_string());
        let params = RETURNS
            .captures(name)
            .map(|c| {
                PARAM_REF
                    .find_iter(&c[1])
                    .map(|m| m.as_str().to_string())
                    .collect()
            })
            .unwrap_or_default();
        let mut relations: Vec<String> = Vec::new();
        for n in node.preorder() {
            if let Some(rel) = &n.info.relation_name {
                if !relations.contains(rel) {
                    relations.push(rel.clone());
                }
            }
        }
        if relations.is_empty() {
            relations.push(NO_RELATION.to_string());
        }
        catalog.entries.insert(
            name.clone(),
            SubplanEntry {
                name: name.clone(),
                label,
                params,
                relations,
            },
        );
    }
    catalog
}

fn rewrite(node: &mut ReducedNode, catalog: &SubplanCatalog, warnings: &mut Vec<String>) {
    for expr in node.info.expressions_mut().into_iter().flatten() {
        *expr = rewrite_expression(expr, catalog, warnings);
    }
    for child in &mut node.children {
        rewrite(child, catalog, warnings);
    }
}

/// Rewrites one expression string against the catalog.
pub(crate) fn rewrite_expression(expr: &str, catalog: &SubplanCatalog, warnings: &mut Vec<String>) -> String {
    let mut unresolved = |what: &str| {
        let msg = format!("unresolved reference {what} in `{expr}`");
        if !warnings.contains(&msg) {
            warnings.push(msg);
        }
    };
    let step = COLUMN_REF.replace_all(expr, |c: &Captures| match catalog.by_label(&c[1]) {
        Some(e) => e.phrase(),
        None => c[0].to_string(),
    });
    let step = LABEL_REF.replace_all(&step, |c: &Captures| match catalog.by_label(&c[1]) {
        Some(e) => e.phrase(),
        None => {
            unresolved(&c[1]);
            c[0].to_string()
        }
    });
    PARAM_REF
        .replace_all(&step, |c: &Captures| match catalog.by_param(&c[0]) {
            Some(e) => e.phrase(),
            None => {
                unresolved(&c[0]);
                c[0].to_string()
            }
        })
        .into_owned()
}
