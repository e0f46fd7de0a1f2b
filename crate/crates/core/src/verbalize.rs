//! Turns triples and reasoning paths into the sentence form fed to the encoder:
//! `<head> reaches <tail> through <relation>`.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::kg_store::{EntityId, KnowledgeGraph, Triple};
use crate::retrieval::{PathSet, ReasoningPath};

pub const DEFAULT_MAX_PATHS: usize = 8;

/// Identifies one path: the `path_index`-th path of the (source, target) set.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PathRef {
    pub source: EntityId,
    pub target: EntityId,
    pub path_index: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnowledgeText {
    pub text: String,
    /// One entry per verbalized path, in sentence order.
    pub provenance: Vec<PathRef>,
    /// The verbalized sentence of each path, without the trailing period.
    pub sentences: Vec<String>,
}

impl KnowledgeText {
    pub fn is_empty(&self) -> bool {
        self.provenance.is_empty()
    }
}

pub fn triple_to_text(t: &Triple, g: &KnowledgeGraph) -> Result<String> {
    let head = g.entity(&t.head)?;
    let tail = g.entity(&t.tail)?;
    Ok(format!(
        "{} reaches {} through {}",
        head.canonical_name,
        tail.canonical_name,
        t.relation.trim()
    ))
}

/// Joins step texts with ", and ", eliding the repeated head after the first step.
pub fn path_to_text(p: &ReasoningPath, g: &KnowledgeGraph) -> Result<String> {
    let mut out = String::new();
    for (i, step) in p.steps().iter().enumerate() {
        if i == 0 {
            out.push_str(&triple_to_text(step, g)?);
        } else {
            g.entity(&step.head)?;
            let tail = g.entity(&step.tail)?;
            out.push_str(&format!(
                ", and reaches {} through {}",
                tail.canonical_name,
                step.relation.trim()
            ));
        }
    }
    Ok(out)
}

/// Concatenates up to `cap` paths, in path-set order then path order, as
/// sentences joined by ". " and closed with ".".
pub fn paths_to_knowledge_text(sets: &[PathSet], g: &KnowledgeGraph, cap: usize) -> Result<KnowledgeText> {
    let mut kt = KnowledgeText::default();
    'outer: for set in sets {
        for (i, path) in set.paths.iter().enumerate() {
            if kt.sentences.len() == cap {
                break 'outer;
            }
            kt.sentences.push(path_to_text(path, g)?);
            kt.provenance.push(PathRef {
                source: set.source.clone(),
                target: set.target.clone(),
                path_index: i,
            });
        }
    }
    if !kt.sentences.is_empty() {
        kt.text = kt.sentences.join(". ");
        kt.text.push('.');
    }
    Ok(kt)
}
