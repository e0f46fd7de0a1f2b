//! Evaluation harness: datasets, metrics, ablations, and explanations.

pub mod ablation;
pub mod dataset;
pub mod explain;
pub mod metrics;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::predict::{Classification, Pipeline};

pub use ablation::{run_ablation, AblationConfig, AblationReport, AblationRow, Variant};
pub use dataset::{load_dataset, parse_dataset, Dataset, DatasetFormat, Example};
pub use explain::{ExplanationRecord, ExplanationStore, NO_KNOWLEDGE_MARKER};
pub use metrics::{compute_metrics, Average, Metrics, Prf};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EvalOptions {
    /// Number of full passes over the dataset; metrics are averaged.
    pub repeats: usize,
    /// Worker threads for classification; 1 runs inline.
    pub jobs: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions { repeats: 1, jobs: 1 }
    }
}

#[derive(Debug, Clone)]
pub struct EvalOutcome {
    /// Mean over `runs`.
    pub metrics: Metrics,
    pub runs: Vec<Metrics>,
    /// Classifications of the last run, in example-id order.
    pub classifications: Vec<Classification>,
}

impl EvalOutcome {
    pub fn identical_repeats(&self) -> bool {
        self.runs.windows(2).all(|w| w[0] == w[1])
    }

    pub fn explanations(&self) -> Vec<ExplanationRecord> {
        self.classifications.iter().map(|c| c.explanation.clone()).collect()
    }
}

/// Classifies every example (in id order) and scores the predictions.
pub fn evaluate(pipeline: &Pipeline, ds: &Dataset, opts: &EvalOptions) -> Result<EvalOutcome> {
    if opts.repeats == 0 {
        return Err(Error::Config("repeats must be at least 1".into()));
    }
    let mut examples: Vec<&Example> = ds.examples.iter().collect();
    examples.sort_by(|a, b| a.id.cmp(&b.id));
    let gold: Vec<&str> = examples.iter().map(|e| e.label.as_str()).collect();

    let mut runs = Vec::with_capacity(opts.repeats);
    let mut last = Vec::new();
    for _ in 0..opts.repeats {
        let classifications = classify_all(pipeline, &examples, opts.jobs)?;
        let predicted: Vec<&str> = classifications.iter().map(|c| c.prediction.label.as_str()).collect();
        runs.push(compute_metrics(&gold, &predicted, &ds.label_set)?);
        last = classifications;
    }
    Ok(EvalOutcome {
        metrics: Metrics::mean(&runs).expect("at least one run"),
        runs,
        classifications: last,
    })
}

fn classify_all(pipeline: &Pipeline, examples: &[&Example], jobs: usize) -> Result<Vec<Classification>> {
    let run = |e: &&Example| pipeline.classify(&e.id, &e.text);
    if jobs <= 1 {
        return examples.iter().map(run).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {jobs} worker threads: {e}")))?;
    pool.install(|| examples.par_iter().map(run).collect())
}
