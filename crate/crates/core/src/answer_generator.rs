//! Answers to the five question categories over one narrated plan.

use std::collections::HashMap;

use serde::Serialize;

use crate::definition_index::InvertedIndex;
use crate::narration::{narrate, NarrationScript};
use crate::operator_tree::{
    build_operator_tree, merge_noncritical, remove_result_nodes, resolve_subplans, ReducedNode, ReducedTree,
    SubplanCatalog, TreeError,
};
use crate::plan_ingest::{parse_explain_json_from, IngestError, PlanSource, RawPlan};
use crate::question_processor::{classify, extract_keywords, extract_step_id, NBModel, QuestionCategory, QuestionError};
use crate::template::TemplateSet;
use crate::timing::{self, StepTiming};

/// A narrated plan together with everything needed to answer questions
/// about it.
#[derive(Debug, Clone)]
pub struct PlanContext {
    pub script: NarrationScript,
    pub tree: ReducedTree,
    pub raw: RawPlan,
    pub catalog: SubplanCatalog,
    /// The EXPLAIN JSON exactly as received.
    pub raw_text: String,
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Tree(#[from] TreeError),
}

impl PipelineError {
    pub fn code(&self) -> &'static str {
        match self {
            PipelineError::Ingest(e) => e.code(),
            PipelineError::Tree(e) => e.code(),
        }
    }
}

impl PlanContext {
    /// Runs ingest, Result removal, merging, subplan resolution and
    /// narration over EXPLAIN JSON text.
    pub fn from_json_text(raw_text: String, source: PlanSource, templates: &TemplateSet) -> Result<Self, PipelineError> {
        let raw = parse_explain_json_from(raw_text.as_bytes(), source)?;
        let tree = remove_result_nodes(build_operator_tree(&raw))?;
        let resolved = resolve_subplans(merge_noncritical(tree));
        let script = narrate(&resolved.tree, templates);
        Ok(PlanContext {
            script,
            tree: resolved.tree,
            raw,
            catalog: resolved.catalog,
            raw_text,
        })
    }

    pub fn step_count(&self) -> usize {
        self.script.len()
    }

    /// The reduced node narrated as `step_id`.
    pub fn node(&self, step_id: usize) -> Result<&ReducedNode, AnswerError> {
        step_id
            .checked_sub(1)
            .and_then(|i| self.tree.postorder().get(i).copied())
            .ok_or(AnswerError::UnknownStep {
                step: step_id,
                count: self.step_count(),
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind")]
pub enum AnswerPayload {
    Definition {
        term: String,
        body: String,
        source: String,
    },
    RowCount {
        step_id: usize,
        rows: u64,
        loops: u64,
    },
    OperatorList {
        operators: Vec<String>,
    },
    StepTime {
        step_id: usize,
        inclusive_ms: f64,
        exclusive_ms: f64,
        clamped: bool,
    },
    Dominant {
        node_type: String,
        total_exclusive_ms: f64,
        step_ids: Vec<usize>,
        /// Some step in the plan had its exclusive time clamped to zero.
        clamped: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Answer {
    pub category: QuestionCategory,
    pub text: String,
    pub payload: AnswerPayload,
}

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
pub enum AnswerError {
    #[error(transparent)]
    Step(#[from] QuestionError),
    #[error("there is no step {step}; the plan has {count} steps")]
    UnknownStep { step: usize, count: usize },
    #[error("the plan carries no runtime statistics")]
    NoRuntimeStats,
    #[error("no definition found for {0:?}")]
    NoDefinitionFound(Vec<String>),
    #[error("no keywords left in the question")]
    EmptyKeywords,
}

impl AnswerError {
    pub fn code(&self) -> &'static str {
        match self {
            AnswerError::Step(e) => e.code(),
            AnswerError::UnknownStep { .. } => "UnknownStep",
            AnswerError::NoRuntimeStats => "NoRuntimeStats",
            AnswerError::NoDefinitionFound(_) => "NoDefinitionFound",
            AnswerError::EmptyKeywords => "EmptyKeywords",
        }
    }

    /// The reply shown to the person who asked.
    pub fn user_message(&self, templates: &TemplateSet) -> String {
        let mut vars: HashMap<&str, String> = HashMap::new();
        let key = match self {
            AnswerError::Step(QuestionError::AmbiguousStepReference(numbers)) => {
                vars.insert("numbers", numbers.join(", "));
                "@error.ambiguous_step_reference"
            }
            AnswerError::Step(_) => "@error.no_step_reference",
            AnswerError::UnknownStep { step, count } => {
                vars.insert("step", step.to_string());
                vars.insert("count", count.to_string());
                "@error.unknown_step"
            }
            AnswerError::NoRuntimeStats => "@error.no_runtime_stats",
            AnswerError::NoDefinitionFound(keywords) => {
                vars.insert("keywords", keywords.join(" "));
                "@error.no_definition_found"
            }
            AnswerError::EmptyKeywords => "@error.empty_keywords",
        };
        templates.required(key).render_map(&vars)
    }
}

/// A failed dispatch still knows which category the question was routed to.
#[derive(Debug, Clone, thiserror::Error, PartialEq)]
#[error("{category} question failed: {error}")]
pub struct DispatchError {
    pub category: QuestionCategory,
    pub error: AnswerError,
}

/// Formats milliseconds with at most three decimals.
pub fn format_ms(ms: f64) -> String {
    let s = format!("{ms:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.into() }
}

fn join_and(items: &[String]) -> String {
    match items {
        [] => String::new(),
        [one] => one.clone(),
        [init @ .., last] => format!("{} and {last}", init.join(", ")),
    }
}

pub fn answer_definition(keywords: &[String], index: &InvertedIndex, templates: &TemplateSet) -> Result<Answer, AnswerError> {
    if keywords.is_empty() {
        return Err(AnswerError::EmptyKeywords);
    }
    let doc = index
        .search(keywords)
        .first()
        .and_then(|(id, _)| index.doc(*id))
        .ok_or_else(|| AnswerError::NoDefinitionFound(keywords.to_vec()))?;
    let vars = HashMap::from([("term", doc.term.clone()), ("body", doc.body.clone())]);
    Ok(Answer {
        category: QuestionCategory::Definition,
        text: templates.required("@answer.definition").render_map(&vars),
        payload: AnswerPayload::Definition {
            term: doc.term.clone(),
            body: doc.body.clone(),
            source: doc.source.clone(),
        },
    })
}

pub fn answer_row_count(step_id: usize, ctx: &PlanContext, templates: &TemplateSet) -> Result<Answer, AnswerError> {
    let node = ctx.node(step_id)?;
    let rows = node.info.actual_rows.ok_or(AnswerError::NoRuntimeStats)?;
    let loops = node.info.actual_loops.unwrap_or(1);
    let mut vars = HashMap::from([("rows", rows.to_string()), ("step", step_id.to_string())]);
    if loops > 1 {
        vars.insert("loops", loops.to_string());
    }
    Ok(Answer {
        category: QuestionCategory::RowCount,
        text: templates.required("@answer.row_count").render_map(&vars),
        payload: AnswerPayload::RowCount { step_id, rows, loops },
    })
}

/// Distinct operator types in step order, absorbed nodes included right
/// after their absorber.
pub fn operator_list(ctx: &PlanContext) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for node in ctx.tree.postorder() {
        let absorbed = node.merged_from.iter().map(|m| &m.node_type);
        for t in std::iter::once(&node.info.node_type).chain(absorbed) {
            if !out.contains(t) {
                out.push(t.clone());
            }
        }
    }
    out
}

pub fn answer_operator_list(ctx: &PlanContext, templates: &TemplateSet) -> Answer {
    let operators = operator_list(ctx);
    let vars = HashMap::from([("operators", join_and(&operators))]);
    Answer {
        category: QuestionCategory::OperatorList,
        text: templates.required("@answer.operator_list").render_map(&vars),
        payload: AnswerPayload::OperatorList { operators },
    }
}

pub fn step_times(step_id: usize, ctx: &PlanContext) -> Result<StepTiming, AnswerError> {
    timing::node_timing(ctx.node(step_id)?).ok_or(AnswerError::NoRuntimeStats)
}

pub fn answer_step_time(step_id: usize, ctx: &PlanContext, templates: &TemplateSet) -> Result<Answer, AnswerError> {
    let t = step_times(step_id, ctx)?;
    let vars = HashMap::from([
        ("step", step_id.to_string()),
        ("exclusive", format_ms(t.exclusive_ms)),
        ("inclusive", format_ms(t.inclusive_ms)),
    ]);
    Ok(Answer {
        category: QuestionCategory::StepTime,
        text: templates.required("@answer.step_time").render_map(&vars),
        payload: AnswerPayload::StepTime {
            step_id,
            inclusive_ms: t.inclusive_ms,
            exclusive_ms: t.exclusive_ms,
            clamped: t.clamped,
        },
    })
}

/// The operator type with the largest summed exclusive time, ties to the
/// type that appears first.
pub fn dominant(ctx: &PlanContext) -> Result<(String, f64, Vec<usize>, bool), AnswerError> {
    let timings = timing::all_timings(&ctx.tree);
    let mut groups: Vec<(String, f64, Vec<usize>)> = Vec::new();
    let mut clamped = false;
    for (i, (node, t)) in ctx.tree.postorder().into_iter().zip(timings).enumerate() {
        let t = t.ok_or(AnswerError::NoRuntimeStats)?;
        clamped |= t.clamped;
        match groups.iter_mut().find(|g| g.0 == node.info.node_type) {
            Some(g) => {
                g.1 += t.exclusive_ms;
                g.2.push(i + 1);
            }
            None => groups.push((node.info.node_type.clone(), t.exclusive_ms, vec![i + 1])),
        }
    }
    let mut best = groups.into_iter().reduce(|a, b| if b.1 > a.1 { b } else { a }).ok_or(AnswerError::NoRuntimeStats)?;
    best.2.sort_unstable();
    Ok((best.0, best.1, best.2, clamped))
}

pub fn answer_dominant(ctx: &PlanContext, templates: &TemplateSet) -> Result<Answer, AnswerError> {
    let (node_type, total, step_ids, clamped) = dominant(ctx)?;
    let steps: Vec<String> = step_ids.iter().map(usize::to_string).collect();
    let steps = match steps.len() {
        1 => format!("step {}", steps[0]),
        _ => format!("steps {}", join_and(&steps)),
    };
    let vars = HashMap::from([
        ("operator", node_type.clone()),
        ("total", format_ms(total)),
        ("steps", steps),
    ]);
    Ok(Answer {
        category: QuestionCategory::DominantOperator,
        text: templates.required("@answer.dominant").render_map(&vars),
        payload: AnswerPayload::Dominant {
            node_type,
            total_exclusive_ms: total,
            step_ids,
            clamped,
        },
    })
}

/// The trained classifier, definition index and templates used to answer
/// questions. Immutable and shareable across threads.
#[derive(Debug, Clone)]
pub struct QaEngine {
    pub model: NBModel,
    pub index: InvertedIndex,
    pub templates: TemplateSet,
}

impl QaEngine {
    pub fn new(model: NBModel, index: InvertedIndex, templates: TemplateSet) -> Self {
        QaEngine { model, index, templates }
    }

    pub fn shipped() -> Self {
        Self::new(NBModel::shipped(), InvertedIndex::shipped(), TemplateSet::shipped())
    }

    pub fn dispatch(&self, question: &str, ctx: &PlanContext) -> Result<Answer, DispatchError> {
        let (category, _) = classify(&self.model, question);
        let t = &self.templates;
        let result = match category {
            QuestionCategory::Definition => answer_definition(&extract_keywords(question), &self.index, t),
            QuestionCategory::RowCount => extract_step_id(question)
                .map_err(AnswerError::from)
                .and_then(|k| answer_row_count(k, ctx, t)),
            QuestionCategory::OperatorList => Ok(answer_operator_list(ctx, t)),
            QuestionCategory::StepTime => extract_step_id(question)
                .map_err(AnswerError::from)
                .and_then(|k| answer_step_time(k, ctx, t)),
            QuestionCategory::DominantOperator => answer_dominant(ctx, t),
        };
        result.map_err(|error| DispatchError { category, error })
    }

    /// Like [`QaEngine::dispatch`] but always produces prose: failures are
    /// turned into their user-facing message.
    pub fn reply(&self, question: &str, ctx: &PlanContext) -> Result<Answer, (QuestionCategory, String, AnswerError)> {
        self.dispatch(question, ctx).map_err(|e| {
            let text = e.error.user_message(&self.templates);
            (e.category, text, e.error)
        })
    }
}
