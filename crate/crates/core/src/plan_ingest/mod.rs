//! Lossless ingestion of PostgreSQL `EXPLAIN (FORMAT JSON)` output.
//!
//! Attributes are kept verbatim and untyped here; curation happens in
//! [`crate::operator_tree`].

mod live;

pub use live::{fetch_plan, fetch_plan_text, fetch_schema, DatabaseConnection, DEFAULT_STATEMENT_TIMEOUT};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

pub const KEY_PLAN: &str = "Plan";
pub const KEY_PLANS: &str = "Plans";
pub const KEY_NODE_TYPE: &str = "Node Type";
pub const KEY_PLANNING_TIME: &str = "Planning Time";
pub const KEY_EXECUTION_TIME: &str = "Execution Time";

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("empty input")]
    EmptyInput,
    #[error("malformed plan: {0}")]
    MalformedPlan(String),
    #[error("connection failure: {0}")]
    ConnectionFailure(String),
    #[error("{0}")]
    QueryError(String),
}

impl IngestError {
    /// Stable error code used in API envelopes.
    pub fn code(&self) -> &'static str {
        match self {
            IngestError::EmptyInput => "EmptyInput",
            IngestError::MalformedPlan(_) => "MalformedPlan",
            IngestError::ConnectionFailure(_) => "ConnectionFailure",
            IngestError::QueryError(_) => "QueryError",
        }
    }
}

fn malformed(msg: impl Into<String>) -> IngestError {
    IngestError::MalformedPlan(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PlanSource {
    File,
    LiveDatabase,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawPlanNode {
    pub node_type: String,
    /// Every key of the plan object except "Node Type" and "Plans", in
    /// source order.
    pub attributes: IndexMap<String, Value>,
    pub children: Vec<RawPlanNode>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawPlan {
    pub root: RawPlanNode,
    pub planning_time_ms: Option<f64>,
    pub execution_time_ms: Option<f64>,
    /// Top-level keys other than "Plan", "Planning Time" and "Execution Time"
    /// (e.g. "Triggers", "JIT"), kept for round-tripping.
    pub extra: IndexMap<String, Value>,
    pub source: PlanSource,
}

impl RawPlanNode {
    pub fn attr(&self, key: &str) -> Option<&Value> {
        self.attributes.get(key)
    }

    /// Number of nodes in this subtree.
    pub fn size(&self) -> usize {
        1 + self.children.iter().map(RawPlanNode::size).sum::<usize>()
    }

    fn from_json(value: &Value) -> Result<Self, IngestError> {
        let obj = value
            .as_object()
            .ok_or_else(|| malformed("plan node is not an object"))?;
        let node_type = match obj.get(KEY_NODE_TYPE) {
            Some(Value::String(s)) if !s.is_empty() => s.clone(),
            Some(_) => return Err(malformed("\"Node Type\" must be a nonempty string")),
            None => return Err(malformed("plan node without \"Node Type\"")),
        };
        let mut attributes = IndexMap::with_capacity(obj.len());
        let mut children = Vec::new();
        for (key, v) in obj {
            match key.as_str() {
                KEY_NODE_TYPE => {}
                KEY_PLANS => {
                    let arr = v
                        .as_array()
                        .ok_or_else(|| malformed("\"Plans\" is not an array"))?;
                    children = arr
                        .iter()
                        .map(RawPlanNode::from_json)
                        .collect::<Result<_, _>>()?;
                }
                _ => {
                    attributes.insert(key.clone(), v.clone());
                }
            }
        }
        Ok(RawPlanNode {
            node_type,
            attributes,
            children,
        })
    }

    /// Rebuilds the plan-object shape: "Node Type" first, attributes in
    /// stored order, "Plans" last when there are children.
    pub fn to_json(&self) -> Value {
        let mut obj = Map::new();
        obj.insert(KEY_NODE_TYPE.into(), Value::String(self.node_type.clone()));
        for (k, v) in &self.attributes {
            obj.insert(k.clone(), v.clone());
        }
        if !self.children.is_empty() {
            obj.insert(
                KEY_PLANS.into(),
                Value::Array(self.children.iter().map(RawPlanNode::to_json).collect()),
            );
        }
        Value::Object(obj)
    }
}

impl RawPlan {
    /// Serializes back to the `[{"Plan": ...}]` shape produced by EXPLAIN.
    pub fn to_json(&self) -> Value {
        let mut top = Map::new();
        top.insert(KEY_PLAN.into(), self.root.to_json());
        if let Some(t) = self.planning_time_ms {
            top.insert(KEY_PLANNING_TIME.into(), Value::from(t));
        }
        for (k, v) in &self.extra {
            top.insert(k.clone(), v.clone());
        }
        if let Some(t) = self.execution_time_ms {
            top.insert(KEY_EXECUTION_TIME.into(), Value::from(t));
        }
        Value::Array(vec![Value::Object(top)])
    }
}

/// Parses EXPLAIN JSON read from a file.
pub fn parse_explain_json(bytes: &[u8]) -> Result<RawPlan, IngestError> {
    parse_explain_json_from(bytes, PlanSource::File)
}

pub fn parse_explain_json_from(bytes: &[u8], source: PlanSource) -> Result<RawPlan, IngestError> {
    let text = std::str::from_utf8(bytes).map_err(|e| malformed(format!("not UTF-8: {e}")))?;
    if text.trim().is_empty() {
        return Err(IngestError::EmptyInput);
    }
    let value: Value = serde_json::from_str(text).map_err(|e| malformed(e.to_string()))?;
    let first = value
        .as_array()
        .ok_or_else(|| malformed("expected a top-level array"))?
        .first()
        .ok_or_else(|| malformed("top-level array is empty"))?
        .as_object()
        .ok_or_else(|| malformed("first array element is not an object"))?;
    let plan = first
        .get(KEY_PLAN)
        .ok_or_else(|| malformed("missing \"Plan\""))?;
    let root = RawPlanNode::from_json(plan)?;

    let mut extra = IndexMap::new();
    let mut planning_time_ms = None;
    let mut execution_time_ms = None;
    for (k, v) in first {
        match k.as_str() {
            KEY_PLAN => {}
            KEY_PLANNING_TIME => planning_time_ms = Some(nonnegative_ms(k, v)?),
            KEY_EXECUTION_TIME => execution_time_ms = Some(nonnegative_ms(k, v)?),
            _ => {
                extra.insert(k.clone(), v.clone());
            }
        }
    }
    Ok(RawPlan {
        root,
        planning_time_ms,
        execution_time_ms,
        extra,
        source,
    })
}

fn nonnegative_ms(key: &str, v: &Value) -> Result<f64, IngestError> {
    match v.as_f64() {
        Some(t) if t >= 0.0 => Ok(t),
        _ => Err(malformed(format!("\"{key}\" must be a nonnegative number"))),
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnInfo {
    pub column_name: String,
    pub type_name: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableInfo {
    pub table_name: String,
    pub columns: Vec<ColumnInfo>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemaInfo {
    pub tables: Vec<TableInfo>,
}
