//! Evaluation: corpus handling, stratified splits, classification metrics,
//! model-judged Likert scores, and rank correlation.

mod benchmark;
mod corpus;
mod judge;
mod metrics;
mod navgen;
mod split;

use thiserror::Error;

pub use benchmark::{run_benchmark, BenchmarkOptions, BenchmarkReport, ItemResult, ScoreSummary, PARTITION_KEYS};
pub use corpus::{convert_corpus, parse_corpus, read_corpus, write_corpus, BenchmarkItem};
pub use judge::{judge, judge_prompt, parse_verdict, JudgeConfig, JudgeReference, JudgeVerdict, RUBRIC};
pub use metrics::{classification_metrics, kendall_tau, ClassMetrics, ClassificationReport, ConfusionMatrix};
pub use navgen::{generate_navigation_queries, parse_generated, GeneratedQuestion};
pub use split::stratified_split;

use crate::gateway::{Gateway, GatewayError};
use crate::pipeline::{ExampleBank, PipelineError, QueryType};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("sequences differ in length ({left} vs {right})")]
    LengthMismatch { left: usize, right: usize },
    #[error("need at least 2 observations, got {0}")]
    TooShort(usize),
    #[error("input contains a non-finite value")]
    NonFinite,
    #[error("rank correlation is undefined when one sequence is entirely tied")]
    Degenerate,
    #[error("split ratio {0} is outside [0, 1]")]
    InvalidRatio(f64),
    #[error("type {kind:?} has {have} item(s), need at least 2")]
    InsufficientItems { kind: QueryType, have: usize },
    #[error("judge output could not be parsed: {0}")]
    Unparseable(String),
    #[error("judge reference is not in the validation split: {0}")]
    ReferenceNotInValidation(String),
    #[error("question generation failed: {0}")]
    Generation(String),
    #[error("corpus: {0}")]
    Corpus(String),
    #[error("io: {0}")]
    Io(String),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
}

/// Classification examples from the validation split. Unanswerable items
/// are skipped since the classifier has no label for them.
pub fn validation_bank(gateway: &Gateway, validation: &[BenchmarkItem]) -> Result<ExampleBank, EvalError> {
    let items = validation
        .iter()
        .filter(|i| QueryType::CLASSES.contains(&i.type_label))
        .map(|i| (i.question.as_str(), i.type_label));
    Ok(ExampleBank::build(gateway, items)?)
}
