//! Run configuration: a flat `key = value` file with dotted section names.
//!
//! ```text
//! # comments start with '#'
//! graph.entities = entities.tsv
//! graph.triples = triples.tsv
//! retrieval.theta = 0.85
//! prompt.template = default
//! ```
//!
//! Relative paths resolve against the directory holding the config file.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::encoder::{EncoderConfig, HashedEncoder};
use crate::error::{read_to_string, Error, Result};
use crate::eval::{Average, DatasetFormat};
use crate::kg_store::{load_graph, KnowledgeGraph};
use crate::predict::{Aggregate, Pipeline, PipelineSettings, Verbalizer};
use crate::prompt::resolve_template;

pub const CONFIG_ENV: &str = "KGPROMPT_CONFIG";

/// Every key `RunConfig::set` accepts.
pub const KEYS: &[&str] = &[
    "encoder.dim",
    "encoder.seed",
    "encoder.projection_path",
    "encoder.embedding_path",
    "encoder.vocab_path",
    "retrieval.theta",
    "retrieval.max_path_len",
    "verbalize.max_paths",
    "prompt.template",
    "prompt.per_path_injection",
    "prompt.inject_knowledge",
    "verbalizer.source",
    "verbalizer.aggregate",
    "verbalizer.full_vocab",
    "eval.average",
    "eval.repeats",
    "eval.dataset",
    "eval.format",
    "graph.entities",
    "graph.triples",
];

#[derive(Debug, Clone, PartialEq)]
pub enum VerbalizerSource {
    Preset(String),
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub encoder: EncoderConfig,
    pub settings: PipelineSettings,
    /// Preset name or literal template spec.
    pub template: String,
    pub verbalizer: VerbalizerSource,
    pub average: Average,
    pub repeats: usize,
    pub entities_path: Option<PathBuf>,
    pub triples_path: Option<PathBuf>,
    pub dataset_path: Option<PathBuf>,
    pub dataset_format: DatasetFormat,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            encoder: EncoderConfig::default(),
            settings: PipelineSettings::default(),
            template: "default".into(),
            verbalizer: VerbalizerSource::Preset("default".into()),
            average: Average::Macro,
            repeats: 1,
            entities_path: None,
            triples_path: None,
            dataset_path: None,
            dataset_format: DatasetFormat::Generic,
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("`{key}`: cannot parse `{value}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!("`{key}`: expected true|false, got `{value}`"))),
    }
}

impl RunConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let src = read_to_string(path).map_err(|e| Error::Config(e.to_string()))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        RunConfig::parse(&src, &path.display().to_string(), base)
    }

    pub fn parse(src: &str, name: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg = RunConfig::default();
        for (i, line) in src.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("{name}:{}: expected `key = value`", i + 1)))?;
            cfg.set(key.trim(), value.trim(), base_dir)
                .map_err(|e| Error::Config(format!("{name}:{}: {e}", i + 1)))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Sets one key. Path values resolve against `base_dir`.
    pub fn set(&mut self, key: &str, value: &str, base_dir: &Path) -> Result<()> {
        let path = || Some(base_dir.join(value));
        match key {
            "encoder.dim" => self.encoder.dim = parse_num(key, value)?,
            "encoder.seed" => self.encoder.seed = parse_num(key, value)?,
            "encoder.projection_path" => self.encoder.projection_path = path(),
            "encoder.embedding_path" => self.encoder.embedding_path = path(),
            "encoder.vocab_path" => self.encoder.vocab_path = path(),
            "retrieval.theta" => self.settings.theta = parse_num(key, value)?,
            "retrieval.max_path_len" => self.settings.max_path_len = parse_num(key, value)?,
            "verbalize.max_paths" => self.settings.max_paths = parse_num(key, value)?,
            "prompt.template" => self.template = value.to_owned(),
            "prompt.per_path_injection" => self.settings.per_path_injection = parse_bool(key, value)?,
            "prompt.inject_knowledge" => self.settings.inject_knowledge = parse_bool(key, value)?,
            "verbalizer.source" => {
                self.verbalizer = if Verbalizer::preset(value).is_some() {
                    VerbalizerSource::Preset(value.to_owned())
                } else {
                    VerbalizerSource::File(base_dir.join(value))
                }
            }
            "verbalizer.aggregate" => self.settings.aggregate = value.parse::<Aggregate>()?,
            "verbalizer.full_vocab" => self.settings.full_vocab = parse_bool(key, value)?,
            "eval.average" => self.average = value.parse()?,
            "eval.repeats" => self.repeats = parse_num(key, value)?,
            "eval.dataset" => self.dataset_path = path(),
            "eval.format" => {
                self.dataset_format = value.parse().map_err(|e: Error| Error::Config(e.to_string()))?
            }
            "graph.entities" => self.entities_path = path(),
            "graph.triples" => self.triples_path = path(),
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.encoder.validate()?;
        let s = &self.settings;
        if !(s.theta > 0.0 && s.theta <= 1.0) {
            return Err(Error::Config(format!("retrieval.theta must lie in (0, 1], got {}", s.theta)));
        }
        if s.max_path_len == 0 {
            return Err(Error::Config("retrieval.max_path_len must be >= 1".into()));
        }
        if s.max_paths == 0 {
            return Err(Error::Config("verbalize.max_paths must be >= 1".into()));
        }
        if self.repeats == 0 {
            return Err(Error::Config("eval.repeats must be >= 1".into()));
        }
        Ok(())
    }

    pub fn load_graph(&self) -> Result<KnowledgeGraph> {
        match (&self.entities_path, &self.triples_path) {
            (Some(e), Some(t)) => load_graph(e, t),
            _ => Err(Error::Config("graph.entities and graph.triples must both be set".into())),
        }
    }

    pub fn load_verbalizer(&self) -> Result<Verbalizer> {
        match &self.verbalizer {
            VerbalizerSource::Preset(name) => {
                Verbalizer::preset(name).ok_or_else(|| Error::Config(format!("unknown verbalizer preset `{name}`")))
            }
            VerbalizerSource::File(p) => Verbalizer::load(p),
        }
    }

    /// Builds a pipeline around an already loaded graph.
    pub fn build_pipeline(&self, graph: Arc<KnowledgeGraph>) -> Result<Pipeline> {
        self.validate()?;
        let encoder = HashedEncoder::new(&self.encoder)?;
        let template = resolve_template(&self.template)?;
        let verbalizer = self.load_verbalizer()?;
        Ok(Pipeline::new(graph, Arc::new(encoder), template, verbalizer, self.settings.clone()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_flat_keys_relative_to_base() {
        let src = "# c\nretrieval.theta = 0.9\nprompt.template = template2\ngraph.entities = e.tsv\nverbalizer.source = verbalizer1\nverbalizer.aggregate = mean\n";
        let cfg = RunConfig::parse(src, "c.conf", Path::new("/data")).unwrap();
        assert_eq!(cfg.settings.theta, 0.9);
        assert_eq!(cfg.template, "template2");
        assert_eq!(cfg.entities_path.as_deref(), Some(Path::new("/data/e.tsv")));
        assert_eq!(cfg.verbalizer, VerbalizerSource::Preset("verbalizer1".into()));
        assert_eq!(cfg.settings.aggregate, Aggregate::Mean);
    }

    #[test]
    fn rejects_unknown_keys_and_ranges() {
        let base = Path::new(".");
        assert!(RunConfig::parse("foo.bar = 1\n", "c", base).is_err());
        assert!(RunConfig::parse("retrieval.theta = 0\n", "c", base).is_err());
        assert!(RunConfig::parse("retrieval.theta = 1.5\n", "c", base).is_err());
        assert!(RunConfig::parse("encoder.dim = 1\n", "c", base).is_err());
        assert!(RunConfig::parse("retrieval.max_path_len = 0\n", "c", base).is_err());
        assert!(RunConfig::parse("just words\n", "c", base).is_err());
        assert!(RunConfig::parse("prompt.per_path_injection = maybe\n", "c", base).is_err());
    }

    #[test]
    fn every_documented_key_is_settable() {
        let mut cfg = RunConfig::default();
        let value = |k: &str| match k {
            "encoder.dim" | "encoder.seed" | "retrieval.max_path_len" | "verbalize.max_paths" | "eval.repeats" => "3",
            "retrieval.theta" => "0.5",
            "prompt.per_path_injection" | "prompt.inject_knowledge" | "verbalizer.full_vocab" => "true",
            "verbalizer.aggregate" => "max",
            "eval.average" => "micro",
            "eval.format" => "generic",
            _ => "x",
        };
        for k in KEYS {
            cfg.set(k, value(k), Path::new(".")).unwrap();
        }
    }

    #[test]
    fn missing_file_is_a_config_error() {
        assert!(matches!(RunConfig::load("/nonexistent/c.conf"), Err(Error::Config(_))));
    }
}
