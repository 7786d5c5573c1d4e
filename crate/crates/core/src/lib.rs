//! Plan narration and question answering over PostgreSQL execution plans.
//!
//! The pipeline runs in stages: [`plan_ingest`] reads `EXPLAIN (FORMAT JSON)`
//! output, [`operator_tree`] curates and reduces it, [`narration`] turns the
//! reduced tree into numbered steps, and [`answer_generator`] answers
//! questions classified by [`question_processor`], with definitions served
//! from [`definition_index`].

pub mod answer_generator;
pub mod definition_index;
pub mod lexicon;
pub mod narration;
pub mod operator_tree;
pub mod plan_ingest;
pub mod question_processor;
pub mod report;
pub mod template;
pub mod timing;
pub mod vocalizer;

pub use answer_generator::{Answer, AnswerError, AnswerPayload, DispatchError, PipelineError, PlanContext, QaEngine};
pub use definition_index::{DefinitionDoc, InvertedIndex};
pub use narration::{NarrationScript, NarrationStep};
pub use operator_tree::{OperatorTree, ReducedTree};
pub use plan_ingest::{IngestError, PlanSource, RawPlan, RawPlanNode, SchemaInfo};
pub use question_processor::{NBModel, QuestionCategory, TrainingSet};
pub use report::NarrateResponse;
pub use template::TemplateSet;
pub use vocalizer::{AudioClip, TtsConfig, TtsError, Vocalizer};
