//! Batch evaluation harness for Chinese Spell Checking (CSC) with chat-model
//! backends.
//!
//! The pipeline: load a character knowledge corpus (pinyin, radicals, stroke
//! data, input codings) and a parallel source/gold dataset; build a
//! constrained zero-, one-, or few-shot chat transcript per sentence with
//! per-character semantic annotations and a declared sentence length; query
//! a pluggable backend (an OpenAI-compatible HTTP endpoint or deterministic
//! mocks); strip the response; and score sentence-level detection and
//! correction accuracy/precision/recall/F1 plus length consistency. Every
//! exchange is recorded to a replay log so any run can be re-scored offline.
//!
//! Start with [`runner::RunConfig`] and [`runner::run_eval`] for end-to-end
//! runs, or compose the pieces directly: [`corpus::Corpus`],
//! [`dataset::Dataset`], [`prompt::PromptBuilder`], [`backend::ChatBackend`],
//! [`eval::aggregate`]. The `examples/` directory demonstrates each major
//! capability.

pub mod backend;
pub mod corpus;
pub mod dataset;
pub mod eval;
pub mod prompt;
pub mod replay;
pub mod report;
pub mod runner;

pub use backend::{BackendConfig, BackendKind, ChatBackend, Completion, CompletionRequest};
pub use corpus::{Attribute, Corpus, FeatureCategory, FeatureSet};
pub use dataset::{Dataset, DatasetStats, SentencePair, Split};
pub use eval::{aggregate, judge_sentence, MetricsReport, Prediction, SentenceJudgment};
pub use prompt::{PromptBuilder, PromptConfig, Regime, TemplateStore, Transcript};
pub use replay::{ReplayRecord, ReplayWriter};
pub use report::RunReport;
pub use runner::{run_eval, RunConfig, RunnerError};
