//! Immutable, indexed store of entities and relation triples.
//!
//! Two tab-separated text files feed the graph:
//!
//! ```text
//! # entities: id <TAB> canonical name <TAB> alias|alias|...
//! D2<TAB>Type 2 Diabetes<TAB>type 2 diabetes|t2dm
//! # triples: head <TAB> relation <TAB> tail
//! D2<TAB>causes<TAB>HBS
//! ```
//!
//! Edges are directed; no inverse edges are synthesized.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{read_to_string, Error, Result};

/// Stable entity identifier as it appears in the entities file.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EntityId(String);

impl EntityId {
    pub fn new(id: impl Into<String>) -> Self {
        EntityId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for EntityId {
    fn from(s: &str) -> Self {
        EntityId(s.to_owned())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Entity {
    pub id: EntityId,
    pub canonical_name: String,
    pub aliases: Vec<String>,
}

impl Entity {
    pub fn new(id: impl Into<EntityId>, canonical_name: impl Into<String>) -> Self {
        Entity {
            id: id.into(),
            canonical_name: canonical_name.into(),
            aliases: Vec::new(),
        }
    }

    pub fn with_aliases<I, S>(mut self, aliases: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.aliases.extend(aliases.into_iter().map(Into::into));
        self
    }

    /// Canonical name followed by every alias, without duplicates.
    pub fn surface_forms(&self) -> impl Iterator<Item = &str> {
        std::iter::once(self.canonical_name.as_str()).chain(
            self.aliases
                .iter()
                .map(String::as_str)
                .filter(move |a| *a != self.canonical_name),
        )
    }
}

impl From<String> for EntityId {
    fn from(s: String) -> Self {
        EntityId(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Triple {
    pub head: EntityId,
    pub relation: String,
    pub tail: EntityId,
}

impl Triple {
    pub fn new(head: impl Into<EntityId>, relation: impl Into<String>, tail: impl Into<EntityId>) -> Self {
        Triple {
            head: head.into(),
            relation: relation.into(),
            tail: tail.into(),
        }
    }
}

/// Lowercase, trim, and collapse internal whitespace runs to one space.
pub fn normalize_surface(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for word in s.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.extend(word.chars().flat_map(char::to_lowercase));
    }
    out
}

#[derive(Debug, Clone)]
pub struct KnowledgeGraph {
    entities: BTreeMap<EntityId, Entity>,
    triples: Vec<Triple>,
    out_index: BTreeMap<EntityId, Vec<(String, EntityId)>>,
    surface_index: BTreeMap<String, BTreeSet<EntityId>>,
    // surface keys as char vectors, bucketed by first char and sorted longest first
    gazetteer: HashMap<char, Vec<Vec<char>>>,
}

impl PartialEq for KnowledgeGraph {
    fn eq(&self, other: &Self) -> bool {
        self.entities == other.entities
            && self.triples == other.triples
            && self.out_index == other.out_index
            && self.surface_index == other.surface_index
    }
}

impl KnowledgeGraph {
    /// Builds a graph, validating ids and dropping duplicate triples.
    pub fn new(entities: Vec<Entity>, triples: Vec<Triple>) -> Result<Self> {
        let mut entity_map = BTreeMap::new();
        for mut entity in entities {
            if entity.canonical_name.trim().is_empty() {
                return Err(Error::Invariant(format!(
                    "entity `{}` has an empty canonical name",
                    entity.id
                )));
            }
            let mut seen = BTreeSet::new();
            entity.aliases.retain(|a| !a.trim().is_empty() && seen.insert(a.clone()));
            if entity_map.contains_key(&entity.id) {
                return Err(Error::Invariant(format!("duplicate entity id `{}`", entity.id)));
            }
            entity_map.insert(entity.id.clone(), entity);
        }

        let mut seen = BTreeSet::new();
        let mut kept = Vec::with_capacity(triples.len());
        for t in triples {
            for id in [&t.head, &t.tail] {
                if !entity_map.contains_key(id) {
                    return Err(Error::UnknownEntity(id.to_string()));
                }
            }
            if t.relation.trim().is_empty() {
                return Err(Error::Invariant(format!(
                    "triple ({}, ?, {}) has an empty relation",
                    t.head, t.tail
                )));
            }
            if seen.insert(t.clone()) {
                kept.push(t);
            }
        }

        let mut graph = KnowledgeGraph {
            entities: entity_map,
            triples: kept,
            out_index: BTreeMap::new(),
            surface_index: BTreeMap::new(),
            gazetteer: HashMap::new(),
        };
        graph.rebuild_indexes();
        Ok(graph)
    }

    fn rebuild_indexes(&mut self) {
        let mut out_index: BTreeMap<EntityId, Vec<(String, EntityId)>> = BTreeMap::new();
        for t in &self.triples {
            out_index
                .entry(t.head.clone())
                .or_default()
                .push((t.relation.clone(), t.tail.clone()));
        }

        let mut surface_index: BTreeMap<String, BTreeSet<EntityId>> = BTreeMap::new();
        for entity in self.entities.values() {
            for form in entity.surface_forms() {
                let key = normalize_surface(form);
                if !key.is_empty() {
                    surface_index.entry(key).or_default().insert(entity.id.clone());
                }
            }
        }

        let mut gazetteer: HashMap<char, Vec<Vec<char>>> = HashMap::new();
        for key in surface_index.keys() {
            let chars: Vec<char> = key.chars().collect();
            gazetteer.entry(chars[0]).or_default().push(chars);
        }
        for bucket in gazetteer.values_mut() {
            bucket.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
        }

        self.out_index = out_index;
        self.surface_index = surface_index;
        self.gazetteer = gazetteer;
    }

    /// Parses the two tab-separated sources. `entities_name` and `triples_name`
    /// are only used in error messages.
    pub fn parse(entities_src: &str, entities_name: &str, triples_src: &str, triples_name: &str) -> Result<Self> {
        let mut entities = Vec::new();
        for (lineno, line) in data_lines(entities_src) {
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() < 2 || fields.len() > 3 {
                return Err(Error::parse(
                    entities_name,
                    lineno,
                    format!("expected 2 or 3 tab-separated fields, found {}", fields.len()),
                ));
            }
            let id = fields[0].trim();
            if id.is_empty() {
                return Err(Error::parse(entities_name, lineno, "empty entity id"));
            }
            if fields[1].trim().is_empty() {
                return Err(Error::parse(entities_name, lineno, "empty canonical name"));
            }
            if entities.iter().any(|e: &Entity| e.id.as_str() == id) {
                return Err(Error::parse(entities_name, lineno, format!("duplicate entity id `{id}`")));
            }
            let aliases = fields
                .get(2)
                .map(|f| f.split('|').map(str::trim).filter(|a| !a.is_empty()).collect::<Vec<_>>())
                .unwrap_or_default();
            entities.push(Entity::new(id, fields[1].trim()).with_aliases(aliases));
        }

        let known: BTreeSet<&str> = entities.iter().map(|e| e.id.as_str()).collect();
        let mut triples = Vec::new();
        for (lineno, line) in data_lines(triples_src) {
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(Error::parse(
                    triples_name,
                    lineno,
                    format!("expected 3 tab-separated fields, found {}", fields.len()),
                ));
            }
            let (head, relation, tail) = (fields[0].trim(), fields[1], fields[2].trim());
            if relation.trim().is_empty() {
                return Err(Error::parse(triples_name, lineno, "empty relation label"));
            }
            for id in [head, tail] {
                if !known.contains(id) {
                    return Err(Error::parse(triples_name, lineno, format!("unknown entity id `{id}`")));
                }
            }
            triples.push(Triple::new(head, relation, tail));
        }

        KnowledgeGraph::new(entities, triples)
    }

    pub fn entities(&self) -> impl Iterator<Item = &Entity> {
        self.entities.values()
    }

    pub fn entity(&self, id: &EntityId) -> Result<&Entity> {
        self.entities
            .get(id)
            .ok_or_else(|| Error::UnknownEntity(id.to_string()))
    }

    pub fn contains(&self, id: &EntityId) -> bool {
        self.entities.contains_key(id)
    }

    pub fn entity_count(&self) -> usize {
        self.entities.len()
    }

    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    pub fn out_index(&self) -> &BTreeMap<EntityId, Vec<(String, EntityId)>> {
        &self.out_index
    }

    pub fn surface_index(&self) -> &BTreeMap<String, BTreeSet<EntityId>> {
        &self.surface_index
    }

    pub(crate) fn gazetteer_bucket(&self, first: char) -> &[Vec<char>] {
        self.gazetteer.get(&first).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Out-edges of `id` in file order.
    pub fn neighbors(&self, id: &EntityId) -> Result<&[(String, EntityId)]> {
        if !self.entities.contains_key(id) {
            return Err(Error::UnknownEntity(id.to_string()));
        }
        Ok(self.out_index.get(id).map(Vec::as_slice).unwrap_or(&[]))
    }

    /// Entities whose normalized surface form equals the normalized input.
    pub fn lookup_surface(&self, surface: &str) -> BTreeSet<EntityId> {
        self.surface_index
            .get(&normalize_surface(surface))
            .cloned()
            .unwrap_or_default()
    }

    /// Writes the graph back in the same file formats `load_graph` reads.
    pub fn write<E: Write, T: Write>(&self, entities: &mut E, triples: &mut T) -> std::io::Result<()> {
        for e in self.entities.values() {
            writeln!(entities, "{}\t{}\t{}", e.id, e.canonical_name, e.aliases.join("|"))?;
        }
        for t in &self.triples {
            writeln!(triples, "{}\t{}\t{}", t.head, t.relation, t.tail)?;
        }
        Ok(())
    }
}

/// Loads a graph from an entities file and a triples file.
pub fn load_graph(entities_path: impl AsRef<Path>, triples_path: impl AsRef<Path>) -> Result<KnowledgeGraph> {
    let (ep, tp) = (entities_path.as_ref(), triples_path.as_ref());
    let entities = read_to_string(ep)?;
    let triples = read_to_string(tp)?;
    KnowledgeGraph::parse(&entities, &ep.display().to_string(), &triples, &tp.display().to_string())
}

/// Writes `g` to the two files; `load_graph` on the result yields an equal graph.
pub fn write_graph(g: &KnowledgeGraph, entities_path: impl AsRef<Path>, triples_path: impl AsRef<Path>) -> Result<()> {
    let (ep, tp) = (entities_path.as_ref(), triples_path.as_ref());
    let mut e = Vec::new();
    let mut t = Vec::new();
    g.write(&mut e, &mut t).expect("writing to a Vec cannot fail");
    std::fs::write(ep, e).map_err(|err| Error::io(ep, err))?;
    std::fs::write(tp, t).map_err(|err| Error::io(tp, err))?;
    Ok(())
}

// 1-based line numbers; skips blank lines and `#` comments
fn data_lines(src: &str) -> impl Iterator<Item = (usize, &str)> {
    src.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
}
