//! Forward inference over a finalized prompt and verbalizer prediction.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::encoder::{EmbeddingVector, Encoder};
use crate::error::{read_to_string, Error, Result};
use crate::eval::explain::{ExplainedPath, ExplanationRecord, MatchSummary};
use crate::kg_store::KnowledgeGraph;
use crate::prompt::{apply_template, finalize_prompt, update_soft, PromptInstance, Template};
use crate::retrieval::{collect_all_paths, match_all, GazetteerExtractor, MentionExtractor};
use crate::verbalize::{paths_to_knowledge_text, PathRef};

/// Verbalizer files shipped with the crate, keyed by preset name. They are
/// written for the label set of the bundled synthetic suite.
pub const VERBALIZER_PRESETS: &[(&str, &str)] = &[
    ("default", include_str!("../data/presets/verbalizer_default.tsv")),
    ("verbalizer1", include_str!("../data/presets/verbalizer1.tsv")),
    ("verbalizer2", include_str!("../data/presets/verbalizer2.tsv")),
    ("verbalizer3", include_str!("../data/presets/verbalizer3.tsv")),
];

/// Maps each label to its label words.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verbalizer {
    labels: Vec<String>,
    words: Vec<Vec<String>>,
}

impl Verbalizer {
    pub fn new<L, W>(entries: impl IntoIterator<Item = (L, Vec<W>)>) -> Result<Self>
    where
        L: Into<String>,
        W: Into<String>,
    {
        let mut labels = Vec::new();
        let mut words = Vec::new();
        let mut seen = BTreeSet::new();
        for (label, ws) in entries {
            let label = label.into();
            if labels.contains(&label) {
                return Err(Error::Config(format!("verbalizer label `{label}` declared twice")));
            }
            let ws: Vec<String> = ws.into_iter().map(|w| w.into().trim().to_lowercase()).collect();
            if ws.is_empty() || ws.iter().any(String::is_empty) {
                return Err(Error::Config(format!("verbalizer label `{label}` has no words")));
            }
            for w in &ws {
                if !seen.insert(w.clone()) {
                    return Err(Error::Config(format!("label word `{w}` assigned more than once")));
                }
            }
            labels.push(label);
            words.push(ws);
        }
        if labels.is_empty() {
            return Err(Error::Config("verbalizer has no labels".into()));
        }
        Ok(Verbalizer { labels, words })
    }

    /// Lines of `label<TAB>word1|word2|...`; `#` lines are comments.
    pub fn parse(src: &str, name: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, line) in src.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (label, words) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(name, i + 1, "expected `label<TAB>word|word`"))?;
            let words: Vec<&str> = words.split('|').map(str::trim).filter(|w| !w.is_empty()).collect();
            entries.push((label.trim().to_owned(), words));
        }
        Verbalizer::new(entries)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Verbalizer::parse(&read_to_string(path)?, &path.display().to_string())
    }

    pub fn preset(name: &str) -> Option<Self> {
        VERBALIZER_PRESETS
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(n, src)| Verbalizer::parse(src, n).expect("bundled verbalizer presets are valid"))
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn words(&self, label: &str) -> Option<&[String]> {
        self.labels.iter().position(|l| l == label).map(|i| self.words[i].as_slice())
    }

    /// Every (label, word) pair in declaration order.
    pub fn entries(&self) -> impl Iterator<Item = (&str, &str)> {
        self.labels
            .iter()
            .zip(&self.words)
            .flat_map(|(l, ws)| ws.iter().map(move |w| (l.as_str(), w.as_str())))
    }
}

/// How word scores combine into a label score.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregate {
    #[default]
    Max,
    Mean,
}

impl FromStr for Aggregate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "max" => Ok(Aggregate::Max),
            "mean" => Ok(Aggregate::Mean),
            other => Err(Error::Config(format!("unknown aggregate `{other}` (expected max|mean)"))),
        }
    }
}

impl fmt::Display for Aggregate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Aggregate::Max => "max",
            Aggregate::Mean => "mean",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: String,
    pub word: String,
    pub word_scores: BTreeMap<String, f64>,
    pub label_scores: BTreeMap<String, f64>,
    pub probabilities: BTreeMap<String, f64>,
    pub explanation_ref: String,
    /// Scores against every word the encoder knows; inspection only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vocab_scores: Option<BTreeMap<String, f64>>,
}

/// Runs the encoder's contextualizer over the (injected) prompt vectors.
pub fn forward(instance: &PromptInstance, encoder: &dyn Encoder) -> Result<Vec<EmbeddingVector>> {
    if !instance.finalized {
        return Err(Error::Invariant("forward called on a prompt that was not finalized".into()));
    }
    Ok(encoder.contextualize(&instance.vectors))
}

pub fn mask_representation(instance: &PromptInstance, output: &[EmbeddingVector]) -> EmbeddingVector {
    output[instance.mask_index].clone()
}

/// Dot product of the mask vector with each label word's embedding.
pub fn score_words(k_mask: &EmbeddingVector, v: &Verbalizer, encoder: &dyn Encoder) -> BTreeMap<String, f64> {
    v.entries()
        .map(|(_, w)| (w.to_owned(), k_mask.dot(&encoder.token_embedding(w))))
        .collect()
}

/// Aggregates word scores per label, applies a softmax over labels, and picks
/// the argmax. Ties resolve to the earlier label in verbalizer order.
pub fn predict_label(scores: &BTreeMap<String, f64>, v: &Verbalizer, aggregate: Aggregate) -> Result<Prediction> {
    if v.labels.is_empty() {
        return Err(Error::Config("verbalizer has no labels".into()));
    }
    let mut label_scores = Vec::with_capacity(v.labels.len());
    let mut top_words = Vec::with_capacity(v.labels.len());
    for (label, words) in v.labels.iter().zip(&v.words) {
        let mut ws = Vec::with_capacity(words.len());
        for w in words {
            let s = *scores
                .get(w)
                .ok_or_else(|| Error::Invariant(format!("no score for label word `{w}`")))?;
            ws.push((w, s));
        }
        let best = ws.iter().fold(ws[0], |acc, x| if x.1 > acc.1 { *x } else { acc });
        let score = match aggregate {
            Aggregate::Max => best.1,
            Aggregate::Mean => ws.iter().map(|x| x.1).sum::<f64>() / ws.len() as f64,
        };
        label_scores.push((label, score));
        top_words.push(best.0);
    }

    let argmax = (1..label_scores.len()).fold(0, |b, i| if label_scores[i].1 > label_scores[b].1 { i } else { b });
    let max = label_scores[argmax].1;
    let exps: Vec<f64> = label_scores.iter().map(|(_, s)| (s - max).exp()).collect();
    let z: f64 = exps.iter().sum();

    Ok(Prediction {
        label: label_scores[argmax].0.clone(),
        word: top_words[argmax].clone(),
        word_scores: scores.clone(),
        label_scores: label_scores.iter().map(|(l, s)| ((*l).clone(), *s)).collect(),
        probabilities: label_scores.iter().zip(&exps).map(|((l, _), e)| ((*l).clone(), e / z)).collect(),
        explanation_ref: String::new(),
        vocab_scores: None,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineSettings {
    pub theta: f64,
    pub max_path_len: usize,
    pub max_paths: usize,
    /// One knowledge vector per path instead of one for the whole knowledge text.
    pub per_path_injection: bool,
    /// False for the remove-knowledge ablation: retrieval still runs but nothing is injected.
    pub inject_knowledge: bool,
    pub aggregate: Aggregate,
    pub full_vocab: bool,
}

impl Default for PipelineSettings {
    fn default() -> Self {
        PipelineSettings {
            theta: crate::retrieval::DEFAULT_THETA,
            max_path_len: crate::retrieval::DEFAULT_MAX_PATH_LEN,
            max_paths: crate::verbalize::DEFAULT_MAX_PATHS,
            per_path_injection: false,
            inject_knowledge: true,
            aggregate: Aggregate::Max,
            full_vocab: false,
        }
    }
}

/// A knowledge vector that entered the soft-token average, with the paths it encodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Injection {
    pub paths: Vec<PathRef>,
    pub vector: EmbeddingVector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    pub prediction: Prediction,
    pub explanation: ExplanationRecord,
    pub injections: Vec<Injection>,
}

/// Everything `classify` needs, shared immutably across calls and threads.
#[derive(Clone)]
pub struct Pipeline {
    graph: Arc<KnowledgeGraph>,
    encoder: Arc<dyn Encoder>,
    extractor: Arc<dyn MentionExtractor>,
    template: Template,
    verbalizer: Verbalizer,
    settings: PipelineSettings,
}

impl fmt::Debug for Pipeline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Pipeline")
            .field("entities", &self.graph.entity_count())
            .field("template", &self.template)
            .field("verbalizer", &self.verbalizer)
            .field("settings", &self.settings)
            .finish_non_exhaustive()
    }
}

impl Pipeline {
    pub fn new(
        graph: Arc<KnowledgeGraph>,
        encoder: Arc<dyn Encoder>,
        template: Template,
        verbalizer: Verbalizer,
        settings: PipelineSettings,
    ) -> Self {
        Pipeline {
            graph,
            encoder,
            extractor: Arc::new(GazetteerExtractor),
            template,
            verbalizer,
            settings,
        }
    }

    pub fn with_extractor(mut self, extractor: Arc<dyn MentionExtractor>) -> Self {
        self.extractor = extractor;
        self
    }

    pub fn with_settings(mut self, settings: PipelineSettings) -> Self {
        self.settings = settings;
        self
    }

    pub fn graph(&self) -> &KnowledgeGraph {
        &self.graph
    }

    pub fn encoder(&self) -> &dyn Encoder {
        self.encoder.as_ref()
    }

    pub fn template(&self) -> &Template {
        &self.template
    }

    pub fn verbalizer(&self) -> &Verbalizer {
        &self.verbalizer
    }

    pub fn settings(&self) -> &PipelineSettings {
        &self.settings
    }

    /// Full pipeline for one input: retrieve, verbalize, encode, inject,
    /// infer, and predict. `id` names the explanation record.
    pub fn classify(&self, id: &str, text: &str) -> Result<Classification> {
        let s = &self.settings;
        let g = self.graph.as_ref();
        let enc = self.encoder.as_ref();

        let mentions = self.extractor.extract(text, g);
        let (matched, unmatched) = match_all(&mentions, g, s.theta);
        let path_sets = collect_all_paths(g, &matched, s.max_path_len);
        let knowledge = paths_to_knowledge_text(&path_sets, g, s.max_paths)?;

        let injections: Vec<Injection> = if !s.inject_knowledge || knowledge.is_empty() {
            Vec::new()
        } else if s.per_path_injection {
            knowledge
                .sentences
                .iter()
                .zip(&knowledge.provenance)
                .map(|(sentence, r)| Injection {
                    paths: vec![r.clone()],
                    vector: enc.encode_passage(&format!("{sentence}.")),
                })
                .collect()
        } else {
            enc.encode_knowledge(&knowledge)
                .map(|vector| Injection {
                    paths: knowledge.provenance.clone(),
                    vector,
                })
                .into_iter()
                .collect()
        };

        let vectors: Vec<EmbeddingVector> = injections.iter().map(|i| i.vector.clone()).collect();
        let instance = apply_template(&self.template, text, enc);
        let instance = finalize_prompt(update_soft(&instance, &vectors)?)?;
        let output = forward(&instance, enc)?;
        let k_mask = mask_representation(&instance, &output);
        let scores = score_words(&k_mask, &self.verbalizer, enc);
        let mut prediction = predict_label(&scores, &self.verbalizer, s.aggregate)?;
        prediction.explanation_ref = id.to_owned();
        if s.full_vocab {
            prediction.vocab_scores = Some(
                enc.vocabulary()
                    .into_iter()
                    .map(|w| {
                        let score = k_mask.dot(&enc.token_embedding(&w));
                        (w, score)
                    })
                    .collect(),
            );
        }

        let injected: BTreeSet<&PathRef> = injections.iter().flat_map(|i| &i.paths).collect();
        let paths: Vec<ExplainedPath> = knowledge
            .provenance
            .iter()
            .zip(&knowledge.sentences)
            .filter(|(r, _)| injected.contains(r))
            .map(|(r, sentence)| ExplainedPath {
                source: r.source.clone(),
                target: r.target.clone(),
                path_index: r.path_index,
                sentence: sentence.clone(),
            })
            .collect();

        let explanation = ExplanationRecord {
            id: id.to_owned(),
            variant: None,
            text: text.to_owned(),
            mentions,
            matched: matched
                .iter()
                .map(|m| MatchSummary {
                    surface: m.mention.surface.clone(),
                    entity: m.entity.clone(),
                    canonical_name: g.entity(&m.entity).map(|e| e.canonical_name.clone()).unwrap_or_default(),
                    score: m.score,
                })
                .collect(),
            unmatched,
            knowledge_injected: !paths.is_empty(),
            paths,
            predicted_label: prediction.label.clone(),
            probabilities: prediction.probabilities.clone(),
        };

        Ok(Classification {
            prediction,
            explanation,
            injections,
        })
    }
}
