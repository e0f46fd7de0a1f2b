//! Prompt templates and knowledge injection into soft tokens.
//!
//! A template is a whitespace-separated pattern such as
//! `{x} is a [SOFT] [MASK] [SOFT] disease .` where `{x}` is replaced by the
//! tokenized input, `[MASK]` marks the prediction slot, and every `[SOFT]`
//! position receives the averaged knowledge vector.

use serde::{Deserialize, Serialize};

use crate::encoder::{EmbeddingVector, Encoder, MASK_TOKEN, SOFT_TOKEN};
use crate::error::{Error, Result};

const INPUT_MARKER: &str = "{x}";

/// Named templates used by the ablation runner.
pub const TEMPLATE_PRESETS: &[(&str, &str)] = &[
    ("default", "{x} is a [SOFT] [MASK] [SOFT] disease ."),
    ("template1", "{x} is a [MASK] type [SOFT] disease ."),
    (
        "template2",
        "The characteristics of {x} include [MASK] nature , and it is also manifested as [SOFT] disease .",
    ),
    ("template3", "{x} . diagnosis : [MASK] [SOFT] ."),
];

pub fn template_preset(name: &str) -> Option<&'static str> {
    TEMPLATE_PRESETS.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum TemplateElement {
    Literal(String),
    Soft,
    Mask,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    elements: Vec<TemplateElement>,
    input_slot: usize,
}

impl Template {
    pub fn elements(&self) -> &[TemplateElement] {
        &self.elements
    }

    /// Number of elements preceding the spliced input.
    pub fn input_slot(&self) -> usize {
        self.input_slot
    }

    pub fn mask_position(&self) -> usize {
        self.elements
            .iter()
            .position(|e| *e == TemplateElement::Mask)
            .expect("validated template has a mask")
    }

    pub fn soft_count(&self) -> usize {
        self.elements.iter().filter(|e| **e == TemplateElement::Soft).count()
    }
}

/// Parses a template spec. Markers may be glued to words (`a[MASK]type`).
pub fn parse_template(spec: &str) -> Result<Template> {
    let spaced = spec
        .replace(MASK_TOKEN, " [MASK] ")
        .replace(SOFT_TOKEN, " [SOFT] ")
        .replace(INPUT_MARKER, " {x} ");
    let mut elements = Vec::new();
    let mut input_slot = None;
    for word in spaced.split_whitespace() {
        match word {
            MASK_TOKEN => elements.push(TemplateElement::Mask),
            SOFT_TOKEN => elements.push(TemplateElement::Soft),
            INPUT_MARKER => {
                if input_slot.replace(elements.len()).is_some() {
                    return Err(Error::Template(format!("`{spec}` has more than one {{x}} slot")));
                }
            }
            w => elements.push(TemplateElement::Literal(w.to_owned())),
        }
    }
    let masks = elements.iter().filter(|e| **e == TemplateElement::Mask).count();
    if masks != 1 {
        return Err(Error::Template(format!("`{spec}` must contain exactly one [MASK], found {masks}")));
    }
    let input_slot = input_slot.ok_or_else(|| Error::Template(format!("`{spec}` has no {{x}} input slot")))?;
    if !elements.contains(&TemplateElement::Soft) {
        return Err(Error::Template(format!("`{spec}` has no [SOFT] token")));
    }
    Ok(Template { elements, input_slot })
}

/// Resolves a preset name, or parses the argument as a literal template.
pub fn resolve_template(name_or_spec: &str) -> Result<Template> {
    parse_template(template_preset(name_or_spec).unwrap_or(name_or_spec))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TokenKind {
    Input,
    Literal,
    Soft,
    Mask,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptToken {
    pub kind: TokenKind,
    pub surface: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptInstance {
    pub tokens: Vec<PromptToken>,
    pub vectors: Vec<EmbeddingVector>,
    pub mask_index: usize,
    pub soft_indices: Vec<usize>,
    #[serde(default)]
    pub finalized: bool,
}

impl PromptInstance {
    pub fn dim(&self) -> usize {
        self.vectors.first().map_or(0, EmbeddingVector::dim)
    }

    /// Checks alignment, marker bookkeeping, and vector dimensions.
    pub fn check_invariants(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Invariant(m));
        if self.tokens.len() != self.vectors.len() {
            return fail(format!("{} tokens but {} vectors", self.tokens.len(), self.vectors.len()));
        }
        let masks: Vec<usize> = self.positions(TokenKind::Mask);
        if masks != [self.mask_index] {
            return fail(format!("mask positions {masks:?}, recorded mask_index {}", self.mask_index));
        }
        let softs = self.positions(TokenKind::Soft);
        if softs.is_empty() || softs != self.soft_indices {
            return fail(format!("soft positions {softs:?}, recorded {:?}", self.soft_indices));
        }
        let d = self.dim();
        if let Some(v) = self.vectors.iter().find(|v| v.dim() != d) {
            return Err(Error::Dimension {
                expected: d,
                found: v.dim(),
            });
        }
        if self.vectors.iter().flat_map(|v| v.as_slice()).any(|x| !x.is_finite()) {
            return fail("non-finite vector entry".into());
        }
        Ok(())
    }

    fn positions(&self, kind: TokenKind) -> Vec<usize> {
        self.tokens
            .iter()
            .enumerate()
            .filter(|(_, t)| t.kind == kind)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Splices the tokenized input into the template and attaches token vectors.
/// Literal words go through the same tokenizer as the input.
pub fn apply_template(t: &Template, x: &str, encoder: &dyn Encoder) -> PromptInstance {
    let words = |s: &str| -> Vec<String> { encoder.tokenize(s).into_iter().skip(1).collect() };
    let mut tokens = Vec::new();
    let mut vectors = Vec::new();
    let mut push = |kind: TokenKind, surface: String, vector: EmbeddingVector| {
        tokens.push(PromptToken { kind, surface });
        vectors.push(vector);
    };

    for (i, element) in t.elements.iter().enumerate() {
        if i == t.input_slot {
            for w in words(x) {
                let v = encoder.token_embedding(&w);
                push(TokenKind::Input, w, v);
            }
        }
        match element {
            TemplateElement::Literal(lit) => {
                for w in words(lit) {
                    let v = encoder.token_embedding(&w);
                    push(TokenKind::Literal, w, v);
                }
            }
            TemplateElement::Soft => push(TokenKind::Soft, SOFT_TOKEN.into(), encoder.token_embedding(SOFT_TOKEN)),
            TemplateElement::Mask => push(TokenKind::Mask, MASK_TOKEN.into(), encoder.token_embedding(MASK_TOKEN)),
        }
    }
    if t.input_slot == t.elements.len() {
        for w in words(x) {
            let v = encoder.token_embedding(&w);
            push(TokenKind::Input, w, v);
        }
    }

    let kind_at = |kind| tokens.iter().enumerate().filter(move |(_, tok): &(usize, &PromptToken)| tok.kind == kind).map(|(i, _)| i);
    let mask_index = kind_at(TokenKind::Mask).next().expect("template has a mask");
    let soft_indices = kind_at(TokenKind::Soft).collect();
    PromptInstance {
        tokens,
        vectors,
        mask_index,
        soft_indices,
        finalized: false,
    }
}

/// Replaces every soft vector with the mean of itself and the `n` knowledge
/// vectors: `(k_soft + Σ k_i) / (n + 1)`. With no knowledge the instance is
/// returned unchanged.
pub fn update_soft(instance: &PromptInstance, knowledge: &[EmbeddingVector]) -> Result<PromptInstance> {
    let mut out = instance.clone();
    if knowledge.is_empty() {
        return Ok(out);
    }
    let d = instance.dim();
    if let Some(k) = knowledge.iter().find(|k| k.dim() != d) {
        return Err(Error::Dimension {
            expected: d,
            found: k.dim(),
        });
    }
    let denom = (knowledge.len() + 1) as f64;
    for &i in &instance.soft_indices {
        let soft = instance.vectors[i].as_slice();
        let averaged: Vec<f64> = (0..d)
            .map(|j| (soft[j] + knowledge.iter().map(|k| k.as_slice()[j]).sum::<f64>()) / denom)
            .collect();
        out.vectors[i] = EmbeddingVector::new(averaged)?;
    }
    Ok(out)
}

/// Validates the instance and marks it ready for forward inference.
pub fn finalize_prompt(instance: PromptInstance) -> Result<PromptInstance> {
    instance.check_invariants()?;
    Ok(PromptInstance {
        finalized: true,
        ..instance
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::{EncoderConfig, HashedEncoder};

    fn enc() -> HashedEncoder {
        HashedEncoder::new(&EncoderConfig::default()).unwrap()
    }

    #[test]
    fn parses_preset_templates() {
        let t = parse_template("{x} is a [MASK] type [SOFT] disease .").unwrap();
        assert_eq!(t.input_slot(), 0);
        assert_eq!(t.mask_position(), 2);
        assert_eq!(t.soft_count(), 1);
        let glued = parse_template("{x} is a[MASK]type[SOFT]disease.").unwrap();
        assert_eq!(glued.mask_position(), 2);
    }

    #[test]
    fn template_errors() {
        assert!(matches!(parse_template("[MASK]"), Err(Error::Template(_))));
        assert!(matches!(parse_template("{x} [MASK] [MASK] [SOFT]"), Err(Error::Template(_))));
        assert!(matches!(parse_template("{x} a [SOFT]"), Err(Error::Template(_))));
        assert!(matches!(parse_template("{x} [MASK] b"), Err(Error::Template(_))));
        assert!(matches!(parse_template("[SOFT] [MASK] c"), Err(Error::Template(_))));
        assert!(matches!(parse_template("{x} {x} [SOFT] [MASK]"), Err(Error::Template(_))));
    }

    #[test]
    fn two_soft_tokens_recorded_in_order() {
        let t = parse_template("a [SOFT] b [SOFT] {x} [MASK]").unwrap();
        let inst = apply_template(&t, "", &enc());
        assert_eq!(inst.soft_indices, vec![1, 3]);
        assert_eq!(inst.mask_index, 4);
    }

    #[test]
    fn presets_all_parse() {
        for (name, _) in TEMPLATE_PRESETS {
            resolve_template(name).unwrap();
        }
    }

    #[test]
    fn applies_template_to_input() {
        let e = enc();
        let t = parse_template("{x} is a [MASK] type [SOFT] disease .").unwrap();
        let inst = apply_template(&t, "Type 2 diabetes", &e);
        let surfaces: Vec<&str> = inst.tokens.iter().map(|t| t.surface.as_str()).collect();
        assert_eq!(
            surfaces,
            ["type", "2", "diabetes", "is", "a", "[MASK]", "type", "[SOFT]", "disease", "."]
        );
        assert_eq!(inst.mask_index, 5);
        assert_eq!(inst.soft_indices, vec![7]);
        assert_eq!(inst.vectors[7], e.token_embedding(SOFT_TOKEN));
        assert_eq!(inst.vectors[5], e.token_embedding(MASK_TOKEN));
        assert_eq!(inst.vectors[0], e.token_embedding("type"));
        inst.check_invariants().unwrap();
    }

    #[test]
    fn empty_input_leaves_template_tokens() {
        let t = parse_template("{x} is a [MASK] type [SOFT] disease .").unwrap();
        let inst = apply_template(&t, "", &enc());
        assert!(inst.tokens.iter().all(|t| t.kind != TokenKind::Input));
        assert_eq!(inst.tokens.len(), 7);
        assert_eq!(inst.mask_index, 2);
    }

    #[test]
    fn input_slot_at_end() {
        let t = parse_template("[SOFT] [MASK] {x}").unwrap();
        let inst = apply_template(&t, "fatigue", &enc());
        assert_eq!(inst.tokens[2].surface, "fatigue");
        assert_eq!(inst.tokens[2].kind, TokenKind::Input);
    }

    fn two_dim_instance(soft: [f64; 2]) -> PromptInstance {
        let v = |a: f64, b: f64| EmbeddingVector::new(vec![a, b]).unwrap();
        PromptInstance {
            tokens: vec![
                PromptToken { kind: TokenKind::Soft, surface: SOFT_TOKEN.into() },
                PromptToken { kind: TokenKind::Mask, surface: MASK_TOKEN.into() },
            ],
            vectors: vec![v(soft[0], soft[1]), v(0.0, 1.0)],
            mask_index: 1,
            soft_indices: vec![0],
            finalized: false,
        }
    }

    #[test]
    fn soft_update_hand_case() {
        let inst = two_dim_instance([1.0, 1.0]);
        let k = EmbeddingVector::new(vec![3.0, 1.0]).unwrap();
        let out = update_soft(&inst, &[k]).unwrap();
        assert_eq!(out.vectors[0].as_slice(), &[2.0, 1.0]);
        assert_eq!(out.vectors[1], inst.vectors[1]);
        assert_eq!(update_soft(&inst, &[]).unwrap(), inst);
    }

    #[test]
    fn soft_update_rejects_dimension_mismatch() {
        let inst = two_dim_instance([1.0, 1.0]);
        let k = EmbeddingVector::new(vec![1.0, 2.0, 3.0]).unwrap();
        assert!(matches!(update_soft(&inst, &[k]), Err(Error::Dimension { .. })));
    }

    #[test]
    fn soft_update_is_not_idempotent() {
        let inst = two_dim_instance([1.0, 1.0]);
        let k = [EmbeddingVector::new(vec![3.0, 1.0]).unwrap()];
        let once = update_soft(&inst, &k).unwrap();
        let twice = update_soft(&once, &k).unwrap();
        assert_ne!(once, twice);
    }

    #[test]
    fn finalize_checks_invariants() {
        let inst = apply_template(&resolve_template("default").unwrap(), "fatigue", &enc());
        let ready = finalize_prompt(inst.clone()).unwrap();
        assert!(ready.finalized);
        assert_eq!(ready.vectors, inst.vectors);

        let mut broken = inst;
        broken.tokens[0].kind = TokenKind::Mask;
        assert!(matches!(finalize_prompt(broken), Err(Error::Invariant(_))));
    }

    #[test]
    fn finalized_instance_json_round_trip_is_bitwise() {
        let inst = apply_template(&resolve_template("default").unwrap(), "type 2 diabetes", &enc());
        let k = enc().encode_passage("Kidney Disease reaches Proteinuria through causes.");
        let ready = finalize_prompt(update_soft(&inst, &[k]).unwrap()).unwrap();
        let json = serde_json::to_string(&ready).unwrap();
        let back: PromptInstance = serde_json::from_str(&json).unwrap();
        for (a, b) in ready.vectors.iter().zip(&back.vectors) {
            let bits = |v: &EmbeddingVector| v.as_slice().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(a), bits(b));
        }
        assert_eq!(ready, back);
    }
}
