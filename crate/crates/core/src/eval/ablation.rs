//! Ablation variants and the TSV/JSON report they produce.

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{evaluate, Average, Dataset, EvalOptions, ExplanationRecord, Metrics};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::kg_store::KnowledgeGraph;

/// Pipeline variants, declared in report row order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Full,
    RemoveKnowledge,
    Template1,
    Template2,
    Template3,
    Verbalizer1,
    Verbalizer2,
    Verbalizer3,
}

impl Variant {
    pub const ALL: [Variant; 8] = [
        Variant::Full,
        Variant::RemoveKnowledge,
        Variant::Template1,
        Variant::Template2,
        Variant::Template3,
        Variant::Verbalizer1,
        Variant::Verbalizer2,
        Variant::Verbalizer3,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::RemoveKnowledge => "remove_knowledge",
            Variant::Template1 => "template1",
            Variant::Template2 => "template2",
            Variant::Template3 => "template3",
            Variant::Verbalizer1 => "verbalizer1",
            Variant::Verbalizer2 => "verbalizer2",
            Variant::Verbalizer3 => "verbalizer3",
        }
    }

    /// Config overrides that turn the base configuration into this variant.
    pub fn overrides(self) -> &'static [(&'static str, &'static str)] {
        match self {
            Variant::Full => &[],
            Variant::RemoveKnowledge => &[("prompt.inject_knowledge", "false")],
            Variant::Template1 => &[("prompt.template", "template1")],
            Variant::Template2 => &[("prompt.template", "template2")],
            Variant::Template3 => &[("prompt.template", "template3")],
            Variant::Verbalizer1 => &[("verbalizer.source", "verbalizer1")],
            Variant::Verbalizer2 => &[("verbalizer.source", "verbalizer2")],
            Variant::Verbalizer3 => &[("verbalizer.source", "verbalizer3")],
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown ablation variant `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AblationConfig {
    pub variant: Variant,
    /// Extra `key = value` settings applied after the variant's own overrides.
    pub overrides: Vec<(String, String)>,
}

impl AblationConfig {
    pub fn new(variant: Variant) -> Self {
        AblationConfig {
            variant,
            overrides: Vec::new(),
        }
    }

    pub fn all() -> Vec<AblationConfig> {
        Variant::ALL.into_iter().map(AblationConfig::new).collect()
    }

    pub fn apply(&self, base: &RunConfig) -> Result<RunConfig> {
        let mut cfg = base.clone();
        let here = Path::new(".");
        for (k, v) in self.variant.overrides() {
            cfg.set(k, v, here)?;
        }
        for (k, v) in &self.overrides {
            cfg.set(k, v, here)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub variant: String,
    pub metrics: Metrics,
    /// Metrics of each repeat; all equal under the deterministic encoder.
    pub runs: Vec<Metrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub dataset: String,
    pub average: Average,
    pub repeats: usize,
    pub seed: u64,
    pub identical_repeats: bool,
    pub rows: Vec<AblationRow>,
}

impl AblationReport {
    /// `variant P R F1 accuracy`, tab-separated, four decimals.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("variant\tP\tR\tF1\taccuracy\n");
        for row in &self.rows {
            let s = row.metrics.summary(self.average);
            out.push_str(&format!(
                "{}\t{:.4}\t{:.4}\t{:.4}\t{:.4}\n",
                row.variant, s.precision, s.recall, s.f1, row.metrics.accuracy
            ));
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Row<'a> {
            variant: &'a str,
            #[serde(rename = "P")]
            p: f64,
            #[serde(rename = "R")]
            r: f64,
            #[serde(rename = "F1")]
            f1: f64,
            accuracy: f64,
        }
        #[derive(Serialize)]
        struct Doc<'a> {
            dataset: &'a str,
            average: Average,
            repeats: usize,
            seed: u64,
            identical_repeats: bool,
            rows: Vec<Row<'a>>,
        }
        let doc = Doc {
            dataset: &self.dataset,
            average: self.average,
            repeats: self.repeats,
            seed: self.seed,
            identical_repeats: self.identical_repeats,
            rows: self
                .rows
                .iter()
                .map(|row| {
                    let s = row.metrics.summary(self.average);
                    Row {
                        variant: &row.variant,
                        p: s.precision,
                        r: s.recall,
                        f1: s.f1,
                        accuracy: row.metrics.accuracy,
                    }
                })
                .collect(),
        };
        let mut json = serde_json::to_string_pretty(&doc)?;
        json.push('\n');
        Ok(json)
    }

    pub fn row(&self, variant: Variant) -> Option<&AblationRow> {
        self.rows.iter().find(|r| r.variant == variant.name())
    }
}

/// Evaluates each variant on `ds` and returns rows in canonical variant order,
/// together with every explanation record tagged by variant.
pub fn run_ablation(
    base: &RunConfig,
    graph: Arc<KnowledgeGraph>,
    ds: &Dataset,
    variants: &[AblationConfig],
    opts: &EvalOptions,
) -> Result<(AblationReport, Vec<ExplanationRecord>)> {
    if variants.is_empty() {
        return Err(Error::Config("no ablation variants requested".into()));
    }
    let mut ordered: Vec<&AblationConfig> = variants.iter().collect();
    ordered.sort_by_key(|v| v.variant);

    let mut rows = Vec::with_capacity(ordered.len());
    let mut explanations = Vec::new();
    for v in ordered {
        let pipeline = v.apply(base)?.build_pipeline(Arc::clone(&graph))?;
        let outcome = evaluate(&pipeline, ds, opts)?;
        explanations.extend(outcome.explanations().into_iter().map(|mut r| {
            r.variant = Some(v.variant.name().to_owned());
            r
        }));
        rows.push(AblationRow {
            variant: v.variant.name().to_owned(),
            metrics: outcome.metrics,
            runs: outcome.runs,
        });
    }
    Ok((
        AblationReport {
            dataset: ds.name.clone(),
            average: base.average,
            repeats: opts.repeats,
            seed: base.encoder.seed,
            identical_repeats: rows.iter().all(|r| r.runs.windows(2).all(|w| w[0] == w[1])),
            rows,
        },
        explanations,
    ))
}
