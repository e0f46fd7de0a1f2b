//! Mention extraction, entity matching, and reasoning-path enumeration.

use std::collections::{BTreeSet, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::kg_store::{normalize_surface, EntityId, KnowledgeGraph, Triple};

pub const DEFAULT_THETA: f64 = 0.85;
pub const DEFAULT_MAX_PATH_LEN: usize = 3;

/// A span of the input text. Offsets count chars, `end` is exclusive.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mention {
    pub surface: String,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchedEntity {
    pub mention: Mention,
    pub entity: EntityId,
    pub score: f64,
}

/// Source of entity mentions. The gazetteer is the reference implementation;
/// a statistical tagger can be plugged in through this trait.
pub trait MentionExtractor: Send + Sync {
    fn extract(&self, text: &str, graph: &KnowledgeGraph) -> Vec<Mention>;
}

/// Greedy longest-match lookup of the graph's surface forms.
#[derive(Debug, Clone, Copy, Default)]
pub struct GazetteerExtractor;

impl MentionExtractor for GazetteerExtractor {
    fn extract(&self, text: &str, graph: &KnowledgeGraph) -> Vec<Mention> {
        extract_mentions(text, graph)
    }
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric()
}

/// Scans the normalized text left to right. At every word boundary the longest
/// surface form that also ends on a word boundary is taken, and scanning resumes
/// after it, so matches never overlap.
pub fn extract_mentions(text: &str, g: &KnowledgeGraph) -> Vec<Mention> {
    let original: Vec<char> = text.chars().collect();
    // normalized chars, each tagged with the index of the original char it came from
    let mut norm: Vec<char> = Vec::with_capacity(original.len());
    let mut origin: Vec<usize> = Vec::with_capacity(original.len());
    let mut pending_space = false;
    for (i, &c) in original.iter().enumerate() {
        if c.is_whitespace() {
            pending_space = !norm.is_empty();
            continue;
        }
        if pending_space {
            norm.push(' ');
            origin.push(i - 1);
            pending_space = false;
        }
        for lc in c.to_lowercase() {
            norm.push(lc);
            origin.push(i);
        }
    }

    let starts_word = |p: usize| p == 0 || !is_word_char(norm[p - 1]) || !is_word_char(norm[p]);
    let ends_word = |e: usize| e == norm.len() || !is_word_char(norm[e]) || !is_word_char(norm[e - 1]);

    let mut mentions = Vec::new();
    let mut p = 0;
    while p < norm.len() {
        if norm[p] == ' ' || !starts_word(p) {
            p += 1;
            continue;
        }
        let hit = g
            .gazetteer_bucket(norm[p])
            .iter()
            .find(|key| {
                let e = p + key.len();
                e <= norm.len() && norm[p..e] == key[..] && ends_word(e)
            })
            .map(Vec::len);
        match hit {
            Some(len) => {
                let start = origin[p];
                let end = origin[p + len - 1] + 1;
                mentions.push(Mention {
                    surface: original[start..end].iter().collect(),
                    start,
                    end,
                });
                p += len;
            }
            None => p += 1,
        }
    }
    mentions
}

fn trigram_counts(s: &str) -> HashMap<[char; 3], usize> {
    let chars: Vec<char> = s.chars().collect();
    let mut counts = HashMap::new();
    for w in chars.windows(3) {
        *counts.entry([w[0], w[1], w[2]]).or_insert(0) += 1;
    }
    counts
}

/// Multiset Jaccard over character trigrams of the normalized strings.
///
/// Strings shorter than three chars compare by exact match. Only identical
/// normalized strings score exactly 1.0; distinct strings that happen to share
/// a trigram multiset (`abab`/`baba`) score just below it.
pub fn similarity(a: &str, b: &str) -> f64 {
    let (a, b) = (normalize_surface(a), normalize_surface(b));
    if a == b {
        return 1.0;
    }
    if a.chars().count() < 3 || b.chars().count() < 3 {
        return 0.0;
    }
    let (ta, tb) = (trigram_counts(&a), trigram_counts(&b));
    let mut inter = 0;
    let mut union = 0;
    for (g, &ca) in &ta {
        let cb = tb.get(g).copied().unwrap_or(0);
        inter += ca.min(cb);
        union += ca.max(cb);
    }
    union += tb.iter().filter(|(g, _)| !ta.contains_key(*g)).map(|(_, &c)| c).sum::<usize>();
    let j = inter as f64 / union as f64;
    if j >= 1.0 {
        1.0 - f64::EPSILON
    } else {
        j
    }
}

/// Best-scoring entity for `m` if its score reaches `theta`. Ties go to the
/// lexicographically smallest entity id.
pub fn match_entity(m: &Mention, g: &KnowledgeGraph, theta: f64) -> Option<MatchedEntity> {
    debug_assert!(theta > 0.0 && theta <= 1.0, "theta must lie in (0, 1]");
    let exact = g.lookup_surface(&m.surface);
    if let Some(id) = exact.into_iter().next() {
        return Some(MatchedEntity {
            mention: m.clone(),
            entity: id,
            score: 1.0,
        });
    }
    let mut best: Option<(f64, &EntityId)> = None;
    // entities() iterates in id order, so a strict `>` keeps the smallest id on ties
    for entity in g.entities() {
        let score = entity
            .surface_forms()
            .map(|form| similarity(&m.surface, form))
            .fold(0.0, f64::max);
        if best.is_none_or(|(s, _)| score > s) {
            best = Some((score, &entity.id));
        }
    }
    best.filter(|(s, _)| *s >= theta).map(|(score, id)| MatchedEntity {
        mention: m.clone(),
        entity: id.clone(),
        score,
    })
}

/// Cycle-free chain of triples.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ReasoningPath {
    steps: Vec<Triple>,
}

impl ReasoningPath {
    /// Returns `None` unless `steps` is non-empty, chained, and cycle-free.
    pub fn new(steps: Vec<Triple>) -> Option<Self> {
        let path = ReasoningPath { steps };
        path.is_valid().then_some(path)
    }

    pub fn steps(&self) -> &[Triple] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn source(&self) -> &EntityId {
        &self.steps[0].head
    }

    pub fn target(&self) -> &EntityId {
        &self.steps[self.steps.len() - 1].tail
    }

    pub fn is_valid(&self) -> bool {
        if self.steps.is_empty() {
            return false;
        }
        if self.steps.windows(2).any(|w| w[0].tail != w[1].head) {
            return false;
        }
        let mut seen = BTreeSet::new();
        seen.insert(&self.steps[0].head);
        self.steps.iter().all(|t| seen.insert(&t.tail))
    }

    fn sort_key(&self) -> (usize, Vec<&str>, Vec<&EntityId>) {
        (
            self.steps.len(),
            self.steps.iter().map(|t| t.relation.as_str()).collect(),
            self.steps.iter().map(|t| &t.tail).collect(),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSet {
    pub source: EntityId,
    pub target: EntityId,
    pub paths: Vec<ReasoningPath>,
    /// Set when source and target coincide; `paths` is then empty.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub same_endpoints: bool,
}

/// Every cycle-free directed path from `source` to `target` with at most
/// `max_len` steps, ordered by length, then relation labels, then the entity
/// sequence.
pub fn find_paths(g: &KnowledgeGraph, source: &EntityId, target: &EntityId, max_len: usize) -> Result<PathSet> {
    g.entity(source)?;
    g.entity(target)?;
    let mut set = PathSet {
        source: source.clone(),
        target: target.clone(),
        paths: Vec::new(),
        same_endpoints: source == target,
    };
    if set.same_endpoints || max_len == 0 {
        return Ok(set);
    }

    struct Search<'a> {
        g: &'a KnowledgeGraph,
        target: &'a EntityId,
        max_len: usize,
        on_path: BTreeSet<&'a EntityId>,
        stack: Vec<Triple>,
        found: Vec<ReasoningPath>,
    }

    impl<'a> Search<'a> {
        fn walk(&mut self, at: &'a EntityId) {
            let edges = self.g.out_index().get(at).map(Vec::as_slice).unwrap_or(&[]);
            for (relation, next) in edges {
                if self.on_path.contains(next) {
                    continue;
                }
                self.stack.push(Triple::new(at.clone(), relation.clone(), next.clone()));
                if next == self.target {
                    self.found.push(ReasoningPath {
                        steps: self.stack.clone(),
                    });
                } else if self.stack.len() < self.max_len {
                    self.on_path.insert(next);
                    self.walk(next);
                    self.on_path.remove(next);
                }
                self.stack.pop();
            }
        }
    }

    let mut search = Search {
        g,
        target,
        max_len,
        on_path: BTreeSet::from([source]),
        stack: Vec::with_capacity(max_len),
        found: Vec::new(),
    };
    search.walk(source);

    let mut paths = search.found;
    paths.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
    paths.dedup();
    set.paths = paths;
    Ok(set)
}

/// One `PathSet` per ordered pair of distinct matched entities, sorted by
/// (source id, target id). Empty sets are kept.
pub fn collect_all_paths(g: &KnowledgeGraph, matched: &[MatchedEntity], max_len: usize) -> Vec<PathSet> {
    let ids: BTreeSet<&EntityId> = matched.iter().map(|m| &m.entity).collect();
    let pairs: Vec<(&EntityId, &EntityId)> = ids
        .iter()
        .flat_map(|a| ids.iter().filter(move |b| *b != a).map(move |b| (*a, *b)))
        .collect();
    pairs
        .par_iter()
        .map(|(s, t)| find_paths(g, s, t, max_len).expect("matched entities exist in the graph"))
        .collect()
}

/// Mentions grouped by whether they matched; the unmatched ones are dropped
/// from retrieval but kept for explanations.
pub fn match_all(mentions: &[Mention], g: &KnowledgeGraph, theta: f64) -> (Vec<MatchedEntity>, Vec<Mention>) {
    let mut matched = Vec::new();
    let mut unmatched = Vec::new();
    for m in mentions {
        match match_entity(m, g, theta) {
            Some(me) => matched.push(me),
            None => unmatched.push(m.clone()),
        }
    }
    (matched, unmatched)
}
