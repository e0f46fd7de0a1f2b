mod common;

use std::collections::BTreeSet;

use common::*;
use kgprompt::encoder::{hashed_unit_vector, mix, EmbeddingTable, EmbeddingVector, EncoderConfig, HashedEncoder};
use kgprompt::eval::compute_metrics;
use kgprompt::kg_store::{load_graph, write_graph, Entity, KnowledgeGraph, Triple};
use kgprompt::predict::{predict_label, score_words, Aggregate, Verbalizer};
use kgprompt::prompt::{update_soft, PromptInstance, PromptToken, TokenKind};
use kgprompt::retrieval::find_paths;
use kgprompt::Encoder;
use proptest::prelude::*;

fn path_triples(g: &KnowledgeGraph, s: &str, t: &str, max_len: usize) -> Vec<Vec<Triple>> {
    find_paths(g, &s.into(), &t.into(), max_len)
        .unwrap()
        .paths
        .iter()
        .map(|p| p.steps().to_vec())
        .collect()
}

proptest! {
    #[test]
    fn paths_equal_brute_force(raw in raw_graph(8, 20), s in 0usize..8, t in 0usize..8, max_len in 1usize..=4) {
        let (s, t) = (node_id(s % raw.nodes), node_id(t % raw.nodes));
        let g = raw.graph();
        prop_assert_eq!(path_triples(&g, &s, &t, max_len), oracle_paths(&raw.triples(), &s, &t, max_len));
    }

    #[test]
    fn paths_grow_with_max_len(raw in raw_graph(8, 20), s in 0usize..8, t in 0usize..8, max_len in 1usize..=3) {
        let (s, t) = (node_id(s % raw.nodes), node_id(t % raw.nodes));
        let g = raw.graph();
        let short: BTreeSet<_> = path_triples(&g, &s, &t, max_len).into_iter().collect();
        let long: BTreeSet<_> = path_triples(&g, &s, &t, max_len + 1).into_iter().collect();
        prop_assert!(short.is_subset(&long));
    }

    #[test]
    fn paths_ignore_triple_order(raw in raw_graph(8, 20), s in 0usize..8, t in 0usize..8, seed in any::<u64>()) {
        let (s, t) = (node_id(s % raw.nodes), node_id(t % raw.nodes));
        let mut shuffled = raw.clone();
        let n = shuffled.edges.len();
        if n > 1 {
            let k = (seed as usize) % n;
            shuffled.edges.rotate_left(k);
            shuffled.edges.reverse();
        }
        prop_assert_eq!(path_triples(&raw.graph(), &s, &t, 4), path_triples(&shuffled.graph(), &s, &t, 4));
    }

    #[test]
    fn every_path_is_valid(raw in raw_graph(8, 20), s in 0usize..8, t in 0usize..8) {
        let (s, t) = (node_id(s % raw.nodes), node_id(t % raw.nodes));
        let set = find_paths(&raw.graph(), &s.as_str().into(), &t.as_str().into(), 4).unwrap();
        for p in &set.paths {
            prop_assert!(p.is_valid());
            prop_assert_eq!(p.source().as_str(), s.as_str());
            prop_assert_eq!(p.target().as_str(), t.as_str());
        }
    }

    #[test]
    fn graph_file_round_trip(raw in raw_graph(10, 25), alias in "[a-z]{3,8}") {
        let entities: Vec<Entity> = (0..raw.nodes)
            .map(|i| Entity::new(node_id(i), format!("Node {i}")).with_aliases([format!("{alias}{i}")]))
            .collect();
        let g = KnowledgeGraph::new(entities, raw.triples()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let (e, t) = (dir.path().join("e.tsv"), dir.path().join("t.tsv"));
        write_graph(&g, &e, &t).unwrap();
        prop_assert_eq!(load_graph(&e, &t).unwrap(), g);
    }

    #[test]
    fn mixer_matches_hand_formula(rows in proptest::collection::vec(unit_vector(4), 1..6)) {
        let vs: Vec<EmbeddingVector> = rows.iter().map(|r| EmbeddingVector::new(r.clone()).unwrap()).collect();
        let out = mix(&vs);
        prop_assert_eq!(out.len(), rows.len());
        for i in 0..rows.len() {
            let l = if i == 0 { &rows[i] } else { &rows[i - 1] };
            let r = rows.get(i + 1).unwrap_or(&rows[i]);
            let raw: Vec<f64> = (0..4).map(|k| 0.5 * rows[i][k] + 0.25 * l[k] + 0.25 * r[k]).collect();
            let norm = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
            for (got, x) in out[i].as_slice().iter().zip(&raw) {
                let want = if norm == 0.0 { 0.0 } else { x / norm };
                prop_assert!((got - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn soft_update_is_elementwise_mean(
        soft in unit_vector(5),
        other in unit_vector(5),
        knowledge in proptest::collection::vec(unit_vector(5), 0..5),
    ) {
        let inst = soft_instance(&soft, &other);
        let ks: Vec<EmbeddingVector> = knowledge.iter().map(|k| EmbeddingVector::new(k.clone()).unwrap()).collect();
        let out = update_soft(&inst, &ks).unwrap();
        let n = knowledge.len() as f64;
        for &i in &[0usize, 2] {
            for j in 0..5 {
                let want = (soft[j] + knowledge.iter().map(|k| k[j]).sum::<f64>()) / (n + 1.0);
                prop_assert!((out.vectors[i].as_slice()[j] - want).abs() <= 1e-12);
            }
        }
        prop_assert_eq!(&out.vectors[1], &inst.vectors[1]);
    }

    #[test]
    fn scores_are_dot_products(k in unit_vector(8), factor in 0.01f64..100.0) {
        let enc = HashedEncoder::new(&EncoderConfig::with_dim(8)).unwrap();
        let v = Verbalizer::preset("verbalizer1").unwrap();
        let k_mask = EmbeddingVector::new(k.clone()).unwrap();
        let scores = score_words(&k_mask, &v, &enc);
        for (_, w) in v.entries() {
            let e = hashed_unit_vector(enc.seed(), w, 8);
            let want: f64 = k.iter().zip(e.as_slice()).map(|(a, b)| a * b).sum();
            prop_assert!((scores[w] - want).abs() <= 1e-12);
        }
        let words: BTreeSet<String> = v.entries().map(|(_, w)| w.to_owned()).collect();
        let scaled = ScaledWords { inner: &enc, words, factor };
        for agg in [Aggregate::Max, Aggregate::Mean] {
            let base = predict_label(&scores, &v, agg).unwrap();
            let moved = predict_label(&score_words(&k_mask, &v, &scaled), &v, agg).unwrap();
            prop_assert_eq!(base.label, moved.label);
        }
    }

    #[test]
    fn metrics_equal_confusion_matrix(pairs in proptest::collection::vec((0usize..4, 0usize..5), 1..40)) {
        let names = ["a", "b", "c", "d", "stray"];
        let labels: Vec<String> = names[..4].iter().map(|s| s.to_string()).collect();
        let gold: Vec<String> = pairs.iter().map(|p| names[p.0].to_owned()).collect();
        let pred: Vec<String> = pairs.iter().map(|p| names[p.1].to_owned()).collect();
        let m = compute_metrics(&gold, &pred, &labels).unwrap();
        let o = oracle_metrics(&gold, &pred, &labels);
        prop_assert_eq!(m.macro_avg.precision, o.macro_p);
        prop_assert_eq!(m.macro_avg.recall, o.macro_r);
        prop_assert_eq!(m.macro_avg.f1, o.macro_f1);
        prop_assert_eq!(m.micro.f1, o.micro_f1);
        prop_assert_eq!(m.accuracy, o.accuracy);
        for (l, prf) in &o.per_label {
            prop_assert_eq!(m.per_label[l].precision, prf.precision);
            prop_assert_eq!(m.per_label[l].recall, prf.recall);
            prop_assert_eq!(m.per_label[l].f1, prf.f1);
        }
    }
}

fn soft_instance(soft: &[f64], other: &[f64]) -> PromptInstance {
    let tok = |kind, s: &str| PromptToken { kind, surface: s.into() };
    PromptInstance {
        tokens: vec![tok(TokenKind::Soft, "[SOFT]"), tok(TokenKind::Mask, "[MASK]"), tok(TokenKind::Soft, "[SOFT]")],
        vectors: vec![
            EmbeddingVector::new(soft.to_vec()).unwrap(),
            EmbeddingVector::new(other.to_vec()).unwrap(),
            EmbeddingVector::new(soft.to_vec()).unwrap(),
        ],
        mask_index: 1,
        soft_indices: vec![0, 2],
        finalized: false,
    }
}

/// Contract every encoder must meet.
fn check_encoder_conformance(enc: &dyn Encoder, text: &str) {
    let seq = enc.encode_text(text);
    assert_eq!(seq.tokens.len(), seq.vectors.len());
    assert_eq!(seq.tokens[0], "[CLS]");
    assert_eq!(seq.pooled, seq.vectors[0]);
    for v in &seq.vectors {
        assert_eq!(v.dim(), enc.dim());
        assert!((v.norm() - 1.0).abs() < 1e-9 || v.norm() == 0.0);
    }
    assert_eq!(enc.encode_text(text), seq, "encoding must be deterministic");
    let e = enc.token_embedding("diabetes");
    assert!((e.norm() - 1.0).abs() < 1e-12);
}

#[test]
fn registered_encoders_conform() {
    let plain = HashedEncoder::new(&EncoderConfig::default()).unwrap();
    let table = EmbeddingTable::parse("[CLS]\t1 0 0 0\ndiabetes\t0 3 4 0\n", "t", 4).unwrap();
    let tabled = HashedEncoder::new(&EncoderConfig::with_dim(4)).unwrap().with_table(table);
    let synthetic = kgprompt::fixtures::synthetic_encoder();
    for text in ["Type 2 diabetes", "", "a, b; c.", "Hyperglycemia with CKD"] {
        check_encoder_conformance(&plain, text);
        check_encoder_conformance(&tabled, text);
        check_encoder_conformance(&synthetic, text);
    }
    assert_eq!(tabled.token_embedding("diabetes").as_slice(), &[0.0, 0.6, 0.8, 0.0]);
}

#[test]
fn different_seeds_give_different_vectors() {
    assert_ne!(hashed_unit_vector(1, "x", 16), hashed_unit_vector(2, "x", 16));
    assert_eq!(hashed_unit_vector(1, "x", 16), hashed_unit_vector(1, "x", 16));
}
