//! Batch harness for LLM-based code translation experiments.
//!
//! The pipeline: load a corpus and enumerate translation tasks, render each
//! prompting strategy (zero-shot, one-shot, two-step, chain-of-thought, with
//! natural-language and AST intermediate representations), query a model
//! through a record/replay cache, extract the candidate program, judge it by
//! compiling and running it against tests, and aggregate success rates.

pub mod corpus;
pub mod ir;
pub mod judge;
pub mod lang;
pub mod model;
pub mod orchestrator;
pub mod postprocess;
pub mod prompt;
pub mod report;

pub use lang::Language;
