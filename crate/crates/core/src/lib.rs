//! Knowledge-graph-enhanced prompt classification.
//!
//! The pipeline for one input text:
//!
//! 1. [`retrieval`] finds entity mentions, links them to the graph, and
//!    enumerates every cycle-free reasoning path between linked entities.
//! 2. [`verbalize`] turns those paths into sentences such as
//!    `Type 2 Diabetes reaches High Blood Sugar through causes`.
//! 3. [`encoder`] encodes the sentences into a pooled knowledge vector.
//! 4. [`prompt`] wraps the input in a template with `[SOFT]` and `[MASK]`
//!    slots and averages the knowledge vector into every soft slot.
//! 5. [`predict`] contextualizes the prompt, reads the mask vector, and
//!    scores it against each label's verbalizer words.
//!
//! [`eval`] runs datasets through the pipeline, computes P/R/F1, runs
//! ablations, and renders per-prediction explanations.

pub mod cli;
pub mod config;
pub mod encoder;
pub mod error;
pub mod eval;
pub mod fixtures;
pub mod kg_store;
pub mod predict;
pub mod prompt;
pub mod retrieval;
pub mod verbalize;

pub use config::RunConfig;
pub use encoder::{EmbeddingVector, Encoder, EncoderConfig, HashedEncoder};
pub use error::{Error, Result};
pub use kg_store::{load_graph, EntityId, KnowledgeGraph, Triple};
pub use predict::{Classification, Pipeline, PipelineSettings, Prediction, Verbalizer};
pub use prompt::{parse_template, Template};
pub use retrieval::{PathSet, ReasoningPath};
pub use verbalize::KnowledgeText;
