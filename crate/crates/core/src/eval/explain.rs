//! Per-prediction evidence: what was found in the text, what it matched in
//! the graph, and which reasoning paths were injected into the prompt.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kg_store::EntityId;
use crate::retrieval::Mention;
use crate::verbalize::PathRef;

pub const NO_KNOWLEDGE_MARKER: &str = "no knowledge injected";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchSummary {
    pub surface: String,
    pub entity: EntityId,
    pub canonical_name: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExplainedPath {
    pub source: EntityId,
    pub target: EntityId,
    pub path_index: usize,
    pub sentence: String,
}

impl ExplainedPath {
    pub fn path_ref(&self) -> PathRef {
        PathRef {
            source: self.source.clone(),
            target: self.target.clone(),
            path_index: self.path_index,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationRecord {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variant: Option<String>,
    pub text: String,
    pub mentions: Vec<Mention>,
    pub matched: Vec<MatchSummary>,
    /// Mentions below the similarity threshold; dropped from retrieval.
    pub unmatched: Vec<Mention>,
    /// Exactly the paths whose encoding entered the soft-token average.
    pub paths: Vec<ExplainedPath>,
    pub knowledge_injected: bool,
    pub predicted_label: String,
    pub probabilities: BTreeMap<String, f64>,
}

impl ExplanationRecord {
    /// Human-readable report of the evidence behind the prediction.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "example: {}", self.id);
        if let Some(v) = &self.variant {
            let _ = writeln!(out, "variant: {v}");
        }
        let _ = writeln!(out, "text: {}", self.text);

        let _ = writeln!(out, "mentions:");
        if self.mentions.is_empty() {
            let _ = writeln!(out, "  (none)");
        }
        for m in &self.mentions {
            let _ = writeln!(out, "  - \"{}\" [{}, {})", m.surface, m.start, m.end);
        }

        let _ = writeln!(out, "matched entities:");
        if self.matched.is_empty() {
            let _ = writeln!(out, "  (none)");
        }
        for m in &self.matched {
            let _ = writeln!(
                out,
                "  - \"{}\" -> {} ({}), similarity {:.4}",
                m.surface, m.entity, m.canonical_name, m.score
            );
        }
        if !self.unmatched.is_empty() {
            let _ = writeln!(out, "unmatched mentions (dropped):");
            for m in &self.unmatched {
                let _ = writeln!(out, "  - \"{}\"", m.surface);
            }
        }

        let _ = writeln!(out, "injected reasoning paths:");
        if self.paths.is_empty() {
            let _ = writeln!(out, "  {NO_KNOWLEDGE_MARKER}");
        }
        for (i, p) in self.paths.iter().enumerate() {
            let _ = writeln!(
                out,
                "  {}. {} ({} -> {}, path {})",
                i + 1,
                p.sentence,
                p.source,
                p.target,
                p.path_index
            );
        }

        let _ = writeln!(out, "prediction: {}", self.predicted_label);
        let mut probs: Vec<(&String, &f64)> = self.probabilities.iter().collect();
        probs.sort_by(|a, b| b.1.total_cmp(a.1).then_with(|| a.0.cmp(b.0)));
        for (label, p) in probs {
            let _ = writeln!(out, "  {label}: {p:.4}");
        }
        out
    }
}

/// Explanation records indexed by id.
#[derive(Debug, Clone, Default)]
pub struct ExplanationStore {
    records: BTreeMap<String, ExplanationRecord>,
}

impl ExplanationStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, record: ExplanationRecord) {
        self.records.insert(record.id.clone(), record);
    }

    pub fn get(&self, id: &str) -> Option<&ExplanationRecord> {
        self.records.get(id)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn explain(&self, id: &str) -> Result<String> {
        self.get(id)
            .map(ExplanationRecord::render)
            .ok_or_else(|| Error::UnknownRecord(id.to_owned()))
    }
}

impl FromIterator<ExplanationRecord> for ExplanationStore {
    fn from_iter<I: IntoIterator<Item = ExplanationRecord>>(iter: I) -> Self {
        let mut store = ExplanationStore::new();
        for r in iter {
            store.insert(r);
        }
        store
    }
}

/// One JSON object per line.
pub fn write_jsonl<W: Write>(records: &[ExplanationRecord], mut w: W) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n").map_err(|e| Error::io("<explanations>", e))?;
    }
    Ok(())
}

pub fn read_jsonl(src: &str) -> Result<Vec<ExplanationRecord>> {
    src.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(Error::from))
        .collect()
}
