//! Independent oracles and generators shared by the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use kgprompt::encoder::EmbeddingVector;
use kgprompt::kg_store::{Entity, KnowledgeGraph, Triple};
use kgprompt::Encoder;
use proptest::prelude::*;

/// A directed multigraph as raw (head, relation, tail) index triples.
#[derive(Debug, Clone)]
pub struct RawGraph {
    pub nodes: usize,
    pub edges: Vec<(usize, usize, usize)>,
}

pub fn node_id(i: usize) -> String {
    format!("N{i:02}")
}

pub fn relation_name(r: usize) -> String {
    ["causes", "treats", "leads to"][r % 3].to_owned()
}

impl RawGraph {
    pub fn triples(&self) -> Vec<Triple> {
        self.edges
            .iter()
            .map(|&(h, r, t)| Triple::new(node_id(h), relation_name(r), node_id(t)))
            .collect()
    }

    pub fn graph(&self) -> KnowledgeGraph {
        let entities = (0..self.nodes).map(|i| Entity::new(node_id(i), format!("Node {i}"))).collect();
        KnowledgeGraph::new(entities, self.triples()).expect("generated graph is valid")
    }
}

/// Up to `max_nodes` nodes and `max_edges` edges, self-loops and parallel edges allowed.
pub fn raw_graph(max_nodes: usize, max_edges: usize) -> impl Strategy<Value = RawGraph> {
    (2..=max_nodes).prop_flat_map(move |n| {
        proptest::collection::vec((0..n, 0..3usize, 0..n), 0..=max_edges)
            .prop_map(move |edges| RawGraph { nodes: n, edges })
    })
}

/// Every cycle-free path from `source` to `target` with at most `max_len`
/// edges, found by brute force over the triple list and sorted by
/// (length, relation sequence, tail sequence).
pub fn oracle_paths(triples: &[Triple], source: &str, target: &str, max_len: usize) -> Vec<Vec<Triple>> {
    let unique: BTreeSet<Triple> = triples.iter().cloned().collect();
    let unique: Vec<Triple> = unique.into_iter().collect();
    let mut found = BTreeSet::new();
    if source == target {
        return Vec::new();
    }
    let mut stack: Vec<Vec<Triple>> = unique
        .iter()
        .filter(|t| t.head.as_str() == source)
        .map(|t| vec![t.clone()])
        .collect();
    while let Some(path) = stack.pop() {
        let mut visited: Vec<&str> = vec![path[0].head.as_str()];
        visited.extend(path.iter().map(|t| t.tail.as_str()));
        let distinct: BTreeSet<&str> = visited.iter().copied().collect();
        if distinct.len() != visited.len() {
            continue;
        }
        let last = path.last().unwrap().tail.as_str();
        if last == target {
            found.insert(path);
            continue;
        }
        if path.len() == max_len {
            continue;
        }
        for t in unique.iter().filter(|t| t.head.as_str() == last) {
            let mut next = path.clone();
            next.push(t.clone());
            stack.push(next);
        }
    }
    let mut out: Vec<Vec<Triple>> = found.into_iter().collect();
    out.sort_by_key(|p| {
        (
            p.len(),
            p.iter().map(|t| t.relation.clone()).collect::<Vec<_>>(),
            p.iter().map(|t| t.tail.as_str().to_owned()).collect::<Vec<_>>(),
        )
    });
    out
}

pub struct OraclePrf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

pub struct OracleMetrics {
    pub per_label: BTreeMap<String, OraclePrf>,
    pub macro_p: f64,
    pub macro_r: f64,
    pub macro_f1: f64,
    pub micro_f1: f64,
    pub accuracy: f64,
}

fn div(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

fn f1(p: f64, r: f64) -> f64 {
    if p > 0.0 && r > 0.0 {
        2.0 * p * r / (p + r)
    } else {
        0.0
    }
}

/// Scores via an explicit confusion matrix over `labels` plus any stray predictions.
pub fn oracle_metrics(gold: &[String], pred: &[String], labels: &[String]) -> OracleMetrics {
    let mut classes: Vec<String> = labels.to_vec();
    for p in pred {
        if !classes.contains(p) {
            classes.push(p.clone());
        }
    }
    let k = classes.len();
    let idx = |s: &String| classes.iter().position(|c| c == s).unwrap();
    let mut cm = vec![vec![0usize; k]; k];
    for (g, p) in gold.iter().zip(pred) {
        cm[idx(g)][idx(p)] += 1;
    }
    let mut per_label = BTreeMap::new();
    let (mut ps, mut rs, mut fs, mut counted) = (0.0, 0.0, 0.0, 0usize);
    let (mut tp_all, mut pred_all, mut gold_all) = (0, 0, 0);
    for (i, label) in labels.iter().enumerate() {
        let tp = cm[i][i];
        let row: usize = cm[i].iter().sum();
        let col: usize = (0..k).map(|r| cm[r][i]).sum();
        let (p, r) = (div(tp, col), div(tp, row));
        if row > 0 {
            ps += p;
            rs += r;
            fs += f1(p, r);
            counted += 1;
            tp_all += tp;
            pred_all += col;
            gold_all += row;
        }
        per_label.insert(label.clone(), OraclePrf { precision: p, recall: r, f1: f1(p, r) });
    }
    let n = counted.max(1) as f64;
    let correct: usize = (0..k).map(|i| cm[i][i]).sum();
    OracleMetrics {
        per_label,
        macro_p: ps / n,
        macro_r: rs / n,
        macro_f1: fs / n,
        micro_f1: f1(div(tp_all, pred_all), div(tp_all, gold_all)),
        accuracy: div(correct, gold.len()),
    }
}

/// Wraps an encoder and multiplies the embeddings of `words` by `factor`.
pub struct ScaledWords<'a> {
    pub inner: &'a dyn Encoder,
    pub words: BTreeSet<String>,
    pub factor: f64,
}

impl Encoder for ScaledWords<'_> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn tokenize(&self, text: &str) -> Vec<String> {
        self.inner.tokenize(text)
    }
    fn token_embedding(&self, token: &str) -> EmbeddingVector {
        let v = self.inner.token_embedding(token);
        if self.words.contains(token) {
            v.scaled(self.factor)
        } else {
            v
        }
    }
    fn contextualize(&self, vectors: &[EmbeddingVector]) -> Vec<EmbeddingVector> {
        self.inner.contextualize(vectors)
    }
}

pub fn unit_vector(dim: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(-1.0f64..1.0, dim).prop_filter("non-zero", |v| v.iter().any(|x| x.abs() > 1e-3))
}

pub fn deterministic_runner(cases: u32) -> proptest::test_runner::TestRunner {
    use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};
    TestRunner::new_with_rng(
        Config { cases, failure_persistence: None, ..Config::default() },
        TestRng::deterministic_rng(RngAlgorithm::ChaCha),
    )
}
