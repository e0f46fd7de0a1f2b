//! Plugs a user-defined encoder into the pipeline.

use std::sync::Arc;

use kgprompt::encoder::{hashed_unit_vector, EmbeddingVector};
use kgprompt::prompt::resolve_template;
use kgprompt::{fixtures, Encoder, Pipeline, PipelineSettings, Verbalizer};

/// Bag-of-letters tokens with a mean-of-window contextualizer.
struct CharEncoder {
    dim: usize,
}

impl Encoder for CharEncoder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn tokenize(&self, text: &str) -> Vec<String> {
        let mut out = vec!["[CLS]".to_owned()];
        out.extend(text.split_whitespace().map(str::to_lowercase));
        out
    }

    fn token_embedding(&self, token: &str) -> EmbeddingVector {
        let mut v = vec![0.0; self.dim];
        for c in token.chars() {
            for (x, y) in v.iter_mut().zip(hashed_unit_vector(7, &c.to_string(), self.dim).as_slice()) {
                *x += y;
            }
        }
        EmbeddingVector::new(v).unwrap().normalized()
    }

    fn contextualize(&self, vectors: &[EmbeddingVector]) -> Vec<EmbeddingVector> {
        (0..vectors.len())
            .map(|i| {
                let window = &vectors[i.saturating_sub(2)..(i + 3).min(vectors.len())];
                let sum: Vec<f64> = (0..self.dim).map(|k| window.iter().map(|v| v.as_slice()[k]).sum()).collect();
                EmbeddingVector::new(sum).unwrap().normalized()
            })
            .collect()
    }
}

fn main() -> anyhow::Result<()> {
    let pipeline = Pipeline::new(
        Arc::new(fixtures::worked_example_graph()),
        Arc::new(CharEncoder { dim: 32 }),
        resolve_template("template1")?,
        Verbalizer::new([("diabetes", vec!["diabetes", "glucose"]), ("kidney disease", vec!["kidney", "renal"])])?,
        PipelineSettings::default(),
    );
    let c = pipeline.classify("demo", "type 2 diabetes with hyperglycemia")?;
    println!("{} {:?}", c.prediction.label, c.prediction.probabilities);
    Ok(())
}
