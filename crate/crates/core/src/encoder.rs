//! Text to vectors.
//!
//! [`Encoder`] is the seam where a real masked-language model would plug in.
//! [`HashedEncoder`] is the deterministic reference: every token maps to a
//! pseudo-random unit vector derived from `(seed, token bytes)`, and one pass
//! of a fixed neighbour mixer stands in for contextualization. The pooled
//! representation is always the position-0 vector (the `[CLS]` sentinel).

use std::collections::{HashMap, HashSet};
use std::path::{Path, PathBuf};

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{read_to_string, Error, Result};
use crate::verbalize::KnowledgeText;

pub const CLS_TOKEN: &str = "[CLS]";
pub const SOFT_TOKEN: &str = "[SOFT]";
pub const MASK_TOKEN: &str = "[MASK]";

pub const DEFAULT_DIM: usize = 64;
pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EmbeddingVector(Vec<f64>);

impl EmbeddingVector {
    /// Fails if any entry is NaN or infinite.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invariant("embedding contains a non-finite value".into()));
        }
        Ok(EmbeddingVector(values))
    }

    pub fn zeros(dim: usize) -> Self {
        EmbeddingVector(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn dot(&self, other: &EmbeddingVector) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    /// Unit-length copy; the zero vector is returned unchanged.
    pub fn normalized(&self) -> EmbeddingVector {
        let n = self.norm();
        if n == 0.0 {
            return self.clone();
        }
        EmbeddingVector(self.0.iter().map(|v| v / n).collect())
    }

    pub fn scaled(&self, c: f64) -> EmbeddingVector {
        EmbeddingVector(self.0.iter().map(|v| v * c).collect())
    }
}

/// Output of [`Encoder::encode_text`].
#[derive(Debug, Clone, PartialEq)]
pub struct TokenSequence {
    pub tokens: Vec<String>,
    pub vectors: Vec<EmbeddingVector>,
    pub pooled: EmbeddingVector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderConfig {
    pub dim: usize,
    pub seed: u64,
    pub projection_path: Option<PathBuf>,
    pub embedding_path: Option<PathBuf>,
    pub vocab_path: Option<PathBuf>,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            dim: DEFAULT_DIM,
            seed: DEFAULT_SEED,
            projection_path: None,
            embedding_path: None,
            vocab_path: None,
        }
    }
}

impl EncoderConfig {
    pub fn with_dim(dim: usize) -> Self {
        EncoderConfig {
            dim,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim < 2 {
            return Err(Error::Config(format!("encoder.dim must be >= 2, got {}", self.dim)));
        }
        Ok(())
    }
}

/// Text encoder interface. Implementations must put the pooled
/// representation at position 0 of the contextualized sequence.
pub trait Encoder: Send + Sync {
    fn dim(&self) -> usize;

    /// Tokens with the classification sentinel at position 0.
    fn tokenize(&self, text: &str) -> Vec<String>;

    fn token_embedding(&self, token: &str) -> EmbeddingVector;

    /// Contextualizes a vector sequence; output is aligned 1:1 with input.
    fn contextualize(&self, vectors: &[EmbeddingVector]) -> Vec<EmbeddingVector>;

    /// The mapping applied to a pooled text vector. Identity unless overridden.
    fn map_representation(&self, x: &EmbeddingVector) -> EmbeddingVector {
        x.clone()
    }

    /// Tokens the encoder knows by name; used only for full-vocabulary inspection.
    fn vocabulary(&self) -> Vec<String> {
        Vec::new()
    }

    fn encode_text(&self, text: &str) -> TokenSequence {
        let tokens = self.tokenize(text);
        let raw: Vec<EmbeddingVector> = tokens.iter().map(|t| self.token_embedding(t)).collect();
        let vectors = self.contextualize(&raw);
        let pooled = vectors[0].clone();
        TokenSequence {
            tokens,
            vectors,
            pooled,
        }
    }

    /// Mapped pooled vector of one passage.
    fn encode_passage(&self, text: &str) -> EmbeddingVector {
        self.map_representation(&self.encode_text(text).pooled)
    }

    /// `None` when there is no knowledge to encode.
    fn encode_knowledge(&self, knowledge: &KnowledgeText) -> Option<EmbeddingVector> {
        if knowledge.text.is_empty() {
            None
        } else {
            Some(self.encode_passage(&knowledge.text))
        }
    }
}

/// Reference contextual mixer: `normalize(0.5·own + 0.25·left + 0.25·right)`,
/// with a missing neighbour replaced by the vector itself.
pub fn mix(vectors: &[EmbeddingVector]) -> Vec<EmbeddingVector> {
    (0..vectors.len())
        .map(|i| {
            let own = &vectors[i];
            let left = if i > 0 { &vectors[i - 1] } else { own };
            let right = vectors.get(i + 1).unwrap_or(own);
            let mixed: Vec<f64> = (0..own.dim())
                .map(|k| 0.5 * own.0[k] + 0.25 * left.0[k] + 0.25 * right.0[k])
                .collect();
            EmbeddingVector(mixed).normalized()
        })
        .collect()
}

/// Deterministic unit vector for `token` under `seed`.
pub fn hashed_unit_vector(seed: u64, token: &str, dim: usize) -> EmbeddingVector {
    // FNV-1a over seed bytes then token bytes
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in seed.to_le_bytes().iter().chain(token.as_bytes()) {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(h);
    loop {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
        let v = EmbeddingVector(v);
        if v.norm() > 0.0 {
            return v.normalized();
        }
    }
}

/// Word splitter with optional greedy longest-prefix subword segmentation.
#[derive(Debug, Clone, Default)]
pub struct Tokenizer {
    vocab: Option<HashSet<String>>,
}

impl Tokenizer {
    pub fn new() -> Self {
        Tokenizer { vocab: None }
    }

    pub fn with_vocab<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Tokenizer {
            vocab: Some(words.into_iter().map(Into::into).collect()),
        }
    }

    pub fn vocab(&self) -> Option<&HashSet<String>> {
        self.vocab.as_ref()
    }

    /// Lowercases, splits on whitespace and punctuation (punctuation chars
    /// become their own tokens), segments out-of-vocabulary words, and
    /// prepends the `[CLS]` sentinel.
    pub fn tokenize(&self, text: &str) -> Vec<String> {
        let mut tokens = vec![CLS_TOKEN.to_owned()];
        let mut word = String::new();
        for c in text.chars().flat_map(char::to_lowercase) {
            if c.is_alphanumeric() {
                word.push(c);
                continue;
            }
            self.flush(&mut word, &mut tokens);
            if !c.is_whitespace() {
                tokens.push(c.to_string());
            }
        }
        self.flush(&mut word, &mut tokens);
        tokens
    }

    fn flush(&self, word: &mut String, out: &mut Vec<String>) {
        if word.is_empty() {
            return;
        }
        match &self.vocab {
            Some(vocab) if !vocab.contains(word.as_str()) => out.extend(segment(word, vocab)),
            _ => out.push(word.clone()),
        }
        word.clear();
    }
}

// Greedy longest known prefix; a char with no known prefix becomes its own piece.
fn segment(word: &str, vocab: &HashSet<String>) -> Vec<String> {
    let chars: Vec<char> = word.chars().collect();
    let mut pieces = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let len = (1..=chars.len() - i)
            .rev()
            .find(|&l| vocab.contains(&chars[i..i + l].iter().collect::<String>()))
            .unwrap_or(1);
        pieces.push(chars[i..i + len].iter().collect());
        i += len;
    }
    pieces
}

/// Square matrix applied to pooled vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    rows: Vec<Vec<f64>>,
}

impl Projection {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let d = rows.len();
        if d == 0 || rows.iter().any(|r| r.len() != d) {
            return Err(Error::Config("projection matrix must be square and non-empty".into()));
        }
        Ok(Projection { rows })
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    /// File format: first line `d`, then `d` lines of `d` space-separated reals.
    pub fn parse(src: &str, name: &str, expected_dim: usize) -> Result<Self> {
        let mut lines = src.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, first) = lines
            .next()
            .ok_or_else(|| Error::Config(format!("{name}: empty projection file")))?;
        let d: usize = first
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("{name}:1: expected the matrix dimension")))?;
        if d != expected_dim {
            return Err(Error::Config(format!(
                "{name}: projection is {d}x{d} but encoder.dim is {expected_dim}"
            )));
        }
        let mut rows = Vec::with_capacity(d);
        for (i, line) in lines {
            let row = line
                .split_whitespace()
                .map(str::parse::<f64>)
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Config(format!("{name}:{}: {e}", i + 1)))?;
            if row.len() != d {
                return Err(Error::Config(format!(
                    "{name}:{}: expected {d} values, found {}",
                    i + 1,
                    row.len()
                )));
            }
            rows.push(row);
        }
        if rows.len() != d {
            return Err(Error::Config(format!("{name}: expected {d} rows, found {}", rows.len())));
        }
        Projection::new(rows)
    }

    pub fn apply(&self, x: &EmbeddingVector) -> EmbeddingVector {
        EmbeddingVector(
            self.rows
                .iter()
                .map(|row| row.iter().zip(x.as_slice()).map(|(a, b)| a * b).sum())
                .collect(),
        )
    }
}

/// Precomputed token vectors, consulted before hashing. Rows are stored unit-normalized.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EmbeddingTable {
    vectors: HashMap<String, EmbeddingVector>,
}

impl EmbeddingTable {
    /// One line per token: `token<TAB>v1 v2 ... vd`.
    pub fn parse(src: &str, name: &str, dim: usize) -> Result<Self> {
        let mut vectors = HashMap::new();
        for (i, line) in src.lines().enumerate() {
            let lineno = i + 1;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (token, values) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(name, lineno, "expected `token<TAB>values`"))?;
            let values = values
                .split_whitespace()
                .map(str::parse::<f64>)
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::parse(name, lineno, e.to_string()))?;
            if values.len() != dim {
                return Err(Error::parse(
                    name,
                    lineno,
                    format!("expected {dim} values, found {}", values.len()),
                ));
            }
            let v = EmbeddingVector::new(values).map_err(|e| Error::parse(name, lineno, e.to_string()))?;
            if v.norm() == 0.0 {
                return Err(Error::parse(name, lineno, "zero vector"));
            }
            vectors.insert(table_key(token.trim()), v.normalized());
        }
        Ok(EmbeddingTable { vectors })
    }

    pub fn get(&self, token: &str) -> Option<&EmbeddingVector> {
        self.vectors.get(token)
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.vectors.keys().map(String::as_str)
    }
}

// special tokens such as `[MASK]` keep their case; ordinary tokens are lowercased
fn table_key(token: &str) -> String {
    if token.starts_with('[') && token.ends_with(']') {
        token.to_owned()
    } else {
        token.to_lowercase()
    }
}

/// The deterministic reference encoder.
#[derive(Debug, Clone)]
pub struct HashedEncoder {
    dim: usize,
    seed: u64,
    tokenizer: Tokenizer,
    table: EmbeddingTable,
    projection: Option<Projection>,
}

impl HashedEncoder {
    /// Builds the encoder, reading any projection, embedding, or vocabulary
    /// file named in `cfg`.
    pub fn new(cfg: &EncoderConfig) -> Result<Self> {
        cfg.validate()?;
        let mut enc = HashedEncoder {
            dim: cfg.dim,
            seed: cfg.seed,
            tokenizer: Tokenizer::new(),
            table: EmbeddingTable::default(),
            projection: None,
        };
        if let Some(p) = &cfg.projection_path {
            enc.projection = Some(Projection::parse(&read_to_string(p)?, &p.display().to_string(), cfg.dim)?);
        }
        if let Some(p) = &cfg.embedding_path {
            enc.table = EmbeddingTable::parse(&read_to_string(p)?, &p.display().to_string(), cfg.dim)?;
        }
        if let Some(p) = &cfg.vocab_path {
            enc.tokenizer = load_vocab(p)?;
        }
        Ok(enc)
    }

    pub fn with_tokenizer(mut self, tokenizer: Tokenizer) -> Self {
        self.tokenizer = tokenizer;
        self
    }

    pub fn with_table(mut self, table: EmbeddingTable) -> Self {
        self.table = table;
        self
    }

    pub fn with_projection(mut self, projection: Projection) -> Result<Self> {
        if projection.dim() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                found: projection.dim(),
            });
        }
        self.projection = Some(projection);
        Ok(self)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

fn load_vocab(path: &Path) -> Result<Tokenizer> {
    let src = read_to_string(path)?;
    Ok(Tokenizer::with_vocab(
        src.lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_lowercase),
    ))
}

impl Encoder for HashedEncoder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn tokenize(&self, text: &str) -> Vec<String> {
        self.tokenizer.tokenize(text)
    }

    fn token_embedding(&self, token: &str) -> EmbeddingVector {
        match self.table.get(token) {
            Some(v) => v.clone(),
            None => hashed_unit_vector(self.seed, token, self.dim),
        }
    }

    fn contextualize(&self, vectors: &[EmbeddingVector]) -> Vec<EmbeddingVector> {
        mix(vectors)
    }

    fn map_representation(&self, x: &EmbeddingVector) -> EmbeddingVector {
        match &self.projection {
            Some(m) => m.apply(x),
            None => x.clone(),
        }
    }

    fn vocabulary(&self) -> Vec<String> {
        let mut words: Vec<String> = self.table.tokens().map(str::to_owned).collect();
        if let Some(v) = self.tokenizer.vocab() {
            words.extend(v.iter().cloned());
        }
        words.sort();
        words.dedup();
        words
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn enc() -> HashedEncoder {
        HashedEncoder::new(&EncoderConfig::default()).unwrap()
    }

    #[test]
    fn tokenize_examples() {
        let t = Tokenizer::new();
        assert_eq!(t.tokenize("Type 2 diabetes"), vec![CLS_TOKEN, "type", "2", "diabetes"]);
        assert_eq!(t.tokenize(""), vec![CLS_TOKEN]);
        assert_eq!(t.tokenize("causes, and."), vec![CLS_TOKEN, "causes", ",", "and", "."]);
    }

    #[test]
    fn subword_segmentation_is_greedy_longest_prefix() {
        let t = Tokenizer::with_vocab(["poly", "uria", "p", "polyu"]);
        // "polyu" is the longest prefix, then "r", "i", "a" have no entry except via fallback
        assert_eq!(t.tokenize("polyuria")[1..], ["polyu", "r", "i", "a"]);
        let t = Tokenizer::with_vocab(["poly", "uria"]);
        assert_eq!(t.tokenize("polyuria")[1..], ["poly", "uria"]);
        assert_eq!(t.tokenize("poly uria")[1..], ["poly", "uria"]);
    }

    #[test]
    fn token_embeddings_are_deterministic_unit_vectors() {
        let e = enc();
        let a = e.token_embedding("diabetes");
        assert_eq!(a, e.token_embedding("diabetes"));
        assert_ne!(a, e.token_embedding("kidney"));
        assert!((a.norm() - 1.0).abs() < 1e-9);
        assert_eq!(a.dim(), DEFAULT_DIM);
    }

    #[test]
    fn seed_changes_embeddings() {
        let a = hashed_unit_vector(1, "x", 8);
        let b = hashed_unit_vector(2, "x", 8);
        assert_ne!(a, b);
    }

    #[test]
    fn single_token_contextualizes_to_itself() {
        let e = enc();
        let seq = e.encode_text("");
        assert_eq!(seq.tokens, vec![CLS_TOKEN]);
        assert_eq!(seq.pooled, e.token_embedding(CLS_TOKEN));
    }

    #[test]
    fn projection_parse_and_apply() {
        let p = Projection::parse("2\n2 0\n0 2\n", "m", 2).unwrap();
        let x = EmbeddingVector::new(vec![0.5, -1.0]).unwrap();
        assert_eq!(p.apply(&x).as_slice(), &[1.0, -2.0]);
        assert!(matches!(Projection::parse("3\n1 0 0\n0 1 0\n0 0 1\n", "m", 2), Err(Error::Config(_))));
        assert!(matches!(Projection::parse("2\n1 0\n0\n", "m", 2), Err(Error::Config(_))));
    }

    #[test]
    fn embedding_table_overrides_hashing() {
        let table = EmbeddingTable::parse("Kidney\t0 3\n[MASK]\t1 0\n", "t", 2).unwrap();
        let e = HashedEncoder::new(&EncoderConfig::with_dim(2)).unwrap().with_table(table);
        assert_eq!(e.token_embedding("kidney").as_slice(), &[0.0, 1.0]);
        assert_eq!(e.token_embedding(MASK_TOKEN).as_slice(), &[1.0, 0.0]);
        assert!(EmbeddingTable::parse("x\t1 2 3\n", "t", 2).is_err());
        assert!(EmbeddingTable::parse("x\t0 0\n", "t", 2).is_err());
    }

    #[test]
    fn empty_knowledge_encodes_to_none() {
        assert!(enc().encode_knowledge(&KnowledgeText::default()).is_none());
    }

    #[test]
    fn dim_below_two_is_rejected() {
        assert!(HashedEncoder::new(&EncoderConfig::with_dim(1)).is_err());
    }

    #[test]
    fn non_finite_vectors_are_rejected() {
        assert!(EmbeddingVector::new(vec![f64::NAN]).is_err());
    }
}
