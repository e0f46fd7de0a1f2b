//! Labelled text datasets in JSON-lines (or a single JSON array).
//!
//! | format      | id                     | text               | label                          |
//! |-------------|------------------------|--------------------|--------------------------------|
//! | `generic`   | `id` (else line no.)   | `text`             | `label`                        |
//! | `chip-ctc`  | `id`                   | `text`             | `label` or `category`          |
//! | `kuake-qtr` | `id`                   | `query` + `title`  | `label`                        |
//! | `imcs-v2`   | `sentence_id` or `id`  | `sentence`         | primary entity type in `BIO_label` |
//!
//! IMCS-V2-NER is a tagging corpus. Each utterance becomes one example whose
//! label is its most frequent `B-` entity type (earliest on ties), or `O`
//! when the utterance has no entity.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{read_to_string, Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum DatasetFormat {
    #[default]
    Generic,
    ChipCtc,
    ImcsV2,
    KuakeQtr,
}

impl FromStr for DatasetFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "generic" => Ok(DatasetFormat::Generic),
            "chip-ctc" => Ok(DatasetFormat::ChipCtc),
            "imcs-v2" => Ok(DatasetFormat::ImcsV2),
            "kuake-qtr" => Ok(DatasetFormat::KuakeQtr),
            other => Err(Error::Dataset(format!(
                "unknown format `{other}` (expected generic|chip-ctc|imcs-v2|kuake-qtr)"
            ))),
        }
    }
}

impl fmt::Display for DatasetFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DatasetFormat::Generic => "generic",
            DatasetFormat::ChipCtc => "chip-ctc",
            DatasetFormat::ImcsV2 => "imcs-v2",
            DatasetFormat::KuakeQtr => "kuake-qtr",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Example {
    pub id: String,
    pub text: String,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    pub name: String,
    pub examples: Vec<Example>,
    /// Distinct labels, sorted.
    pub label_set: Vec<String>,
}

impl Dataset {
    /// Validates ids and collects the label set.
    pub fn new(name: impl Into<String>, examples: Vec<Example>) -> Result<Self> {
        let name = name.into();
        if examples.is_empty() {
            return Err(Error::Dataset(format!("{name}: dataset is empty")));
        }
        let mut ids = BTreeSet::new();
        let mut labels = BTreeSet::new();
        for ex in &examples {
            if !ids.insert(ex.id.as_str()) {
                return Err(Error::Dataset(format!("{name}: duplicate example id `{}`", ex.id)));
            }
            labels.insert(ex.label.clone());
        }
        let label_set: Vec<String> = labels.into_iter().collect();
        Ok(Dataset {
            name,
            examples,
            label_set,
        })
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }
}

pub fn load_dataset(path: impl AsRef<Path>, format: DatasetFormat) -> Result<Dataset> {
    let path = path.as_ref();
    parse_dataset(&read_to_string(path)?, &path.display().to_string(), format)
}

/// Parses JSON-lines, or a whole-file JSON array when the first non-blank char is `[`.
pub fn parse_dataset(src: &str, name: &str, format: DatasetFormat) -> Result<Dataset> {
    let records: Vec<(usize, Value)> = if src.trim_start().starts_with('[') {
        let arr: Vec<Value> = serde_json::from_str(src).map_err(|e| Error::Dataset(format!("{name}: {e}")))?;
        arr.into_iter().enumerate().map(|(i, v)| (i + 1, v)).collect()
    } else {
        src.lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                serde_json::from_str(l)
                    .map(|v| (i + 1, v))
                    .map_err(|e| Error::Dataset(format!("{name}:{}: {e}", i + 1)))
            })
            .collect::<Result<_>>()?
    };

    let examples = records
        .into_iter()
        .map(|(n, rec)| to_example(&rec, format).map_err(|m| Error::Dataset(format!("{name}:{n}: {m}"))))
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(name, examples)
}

fn field_str(rec: &Value, key: &str) -> Option<String> {
    match rec.get(key)? {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

fn required(rec: &Value, key: &str) -> std::result::Result<String, String> {
    field_str(rec, key).ok_or_else(|| format!("missing field `{key}`"))
}

fn to_example(rec: &Value, format: DatasetFormat) -> std::result::Result<Example, String> {
    let id = |keys: &[&str]| keys.iter().find_map(|k| field_str(rec, k));
    match format {
        DatasetFormat::Generic => Ok(Example {
            id: id(&["id"]).ok_or("missing field `id`")?,
            text: required(rec, "text")?,
            label: required(rec, "label")?,
        }),
        DatasetFormat::ChipCtc => Ok(Example {
            id: id(&["id"]).ok_or("missing field `id`")?,
            text: required(rec, "text")?,
            label: field_str(rec, "label")
                .or_else(|| field_str(rec, "category"))
                .ok_or("missing field `label`")?,
        }),
        DatasetFormat::KuakeQtr => Ok(Example {
            id: id(&["id"]).ok_or("missing field `id`")?,
            text: format!("{} {}", required(rec, "query")?, required(rec, "title")?),
            label: required(rec, "label")?,
        }),
        DatasetFormat::ImcsV2 => Ok(Example {
            id: id(&["sentence_id", "id"]).ok_or("missing field `sentence_id`")?,
            text: required(rec, "sentence")?,
            label: primary_category(&required(rec, "BIO_label")?),
        }),
    }
}

/// Most frequent entity type among `B-` tags; ties go to the earliest, none gives `O`.
pub fn primary_category(bio: &str) -> String {
    let mut counts: HashMap<&str, (usize, usize)> = HashMap::new();
    for (pos, tag) in bio.split_whitespace().enumerate() {
        if let Some(kind) = tag.strip_prefix("B-") {
            counts.entry(kind).or_insert((0, pos)).0 += 1;
        }
    }
    counts
        .into_iter()
        .max_by(|a, b| a.1 .0.cmp(&b.1 .0).then(b.1 .1.cmp(&a.1 .1)))
        .map_or_else(|| "O".to_owned(), |(k, _)| k.to_owned())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generic_jsonl() {
        let src = r#"{"id":"1","text":"a","label":"x"}
{"id":"2","text":"b","label":"y"}

{"id":3,"text":"c","label":"x"}"#;
        let ds = parse_dataset(src, "d", DatasetFormat::Generic).unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.label_set, ["x", "y"]);
        assert_eq!(ds.examples[2].id, "3");
    }

    #[test]
    fn duplicate_id_is_named() {
        let src = "{\"id\":\"e7\",\"text\":\"a\",\"label\":\"x\"}\n{\"id\":\"e7\",\"text\":\"b\",\"label\":\"x\"}\n";
        let err = parse_dataset(src, "d", DatasetFormat::Generic).unwrap_err();
        assert!(err.to_string().contains("e7"), "{err}");
    }

    #[test]
    fn missing_field_names_line() {
        let err = parse_dataset("{\"id\":\"1\",\"label\":\"x\"}\n", "d.jsonl", DatasetFormat::Generic).unwrap_err();
        assert!(err.to_string().contains("d.jsonl:1") && err.to_string().contains("text"), "{err}");
    }

    #[test]
    fn unknown_format() {
        assert!("conll".parse::<DatasetFormat>().is_err());
        assert_eq!("kuake-qtr".parse::<DatasetFormat>().unwrap(), DatasetFormat::KuakeQtr);
    }

    #[test]
    fn remapped_formats() {
        let chip = r#"[{"id":"s1","category":"Disease","text":"t2dm history"}]"#;
        let ds = parse_dataset(chip, "c", DatasetFormat::ChipCtc).unwrap();
        assert_eq!(ds.examples[0].label, "Disease");

        let qtr = r#"{"id":"q1","query":"ckd diet","title":"low protein diet","label":"2"}"#;
        let ds = parse_dataset(qtr, "q", DatasetFormat::KuakeQtr).unwrap();
        assert_eq!(ds.examples[0].text, "ckd diet low protein diet");

        let imcs = r#"{"sentence_id":"10","sentence":"fever and cough","BIO_label":"B-Symptom I-Symptom O B-Symptom"}"#;
        let ds = parse_dataset(imcs, "i", DatasetFormat::ImcsV2).unwrap();
        assert_eq!(ds.examples[0].label, "Symptom");
    }

    #[test]
    fn primary_category_rules() {
        assert_eq!(primary_category("O O"), "O");
        assert_eq!(primary_category("B-Drug O B-Symptom B-Symptom"), "Symptom");
        assert_eq!(primary_category("B-Drug B-Symptom"), "Drug");
    }

    #[test]
    fn empty_dataset_rejected() {
        assert!(parse_dataset("\n", "d", DatasetFormat::Generic).is_err());
    }
}
