//! Data bundled with the crate: the three-entity worked example and the
//! 30-example synthetic evaluation suite.

use std::path::PathBuf;

use crate::encoder::{EmbeddingTable, EncoderConfig, HashedEncoder};
use crate::eval::{parse_dataset, Dataset, DatasetFormat};
use crate::kg_store::KnowledgeGraph;

const WORKED_ENTITIES: &str = include_str!("../data/worked_example/entities.tsv");
const WORKED_TRIPLES: &str = include_str!("../data/worked_example/triples.tsv");
const SYNTHETIC_ENTITIES: &str = include_str!("../data/synthetic/entities.tsv");
const SYNTHETIC_TRIPLES: &str = include_str!("../data/synthetic/triples.tsv");
const SYNTHETIC_DATASET: &str = include_str!("../data/synthetic/dataset.jsonl");
const SYNTHETIC_EMBEDDINGS: &str = include_str!("../data/synthetic/embeddings.tsv");

/// Sentence the worked example's D2 -> KD path verbalizes to.
pub const WORKED_PATH_SENTENCE: &str =
    "Type 2 Diabetes reaches High Blood Sugar through causes, and reaches Kidney Disease through leads to";

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data")
}

/// `D2 -causes-> HBS -leads to-> KD`.
pub fn worked_example_graph() -> KnowledgeGraph {
    KnowledgeGraph::parse(WORKED_ENTITIES, "worked_example/entities.tsv", WORKED_TRIPLES, "worked_example/triples.tsv")
        .expect("bundled worked example is valid")
}

pub fn worked_example_config_path() -> PathBuf {
    data_dir().join("worked_example/worked.conf")
}

pub fn synthetic_graph() -> KnowledgeGraph {
    KnowledgeGraph::parse(SYNTHETIC_ENTITIES, "synthetic/entities.tsv", SYNTHETIC_TRIPLES, "synthetic/triples.tsv")
        .expect("bundled synthetic graph is valid")
}

pub fn synthetic_dataset() -> Dataset {
    parse_dataset(SYNTHETIC_DATASET, "synthetic", DatasetFormat::Generic).expect("bundled synthetic dataset is valid")
}

pub fn synthetic_config_path() -> PathBuf {
    data_dir().join("synthetic/synthetic.conf")
}

pub fn synthetic_dataset_path() -> PathBuf {
    data_dir().join("synthetic/dataset.jsonl")
}

/// Reference encoder with the synthetic suite's anchor vectors.
pub fn synthetic_encoder() -> HashedEncoder {
    let cfg = EncoderConfig::default();
    let table = EmbeddingTable::parse(SYNTHETIC_EMBEDDINGS, "synthetic/embeddings.tsv", cfg.dim)
        .expect("bundled embedding table is valid");
    HashedEncoder::new(&cfg).expect("default encoder config is valid").with_table(table)
}
