//! Knowledge index checked against a brute-force linear scan.

use std::collections::BTreeSet;
use std::time::Instant;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use saathi_core::cultural::{Dimension, Tag};
use saathi_core::gateway::Embedding;
use saathi_core::knowledge::{chunk_document, cosine, KnowledgeChunk, KnowledgeIndex};

fn random_unit(rng: &mut ChaCha8Rng, dim: usize) -> Embedding {
    let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    Embedding::normalized(v).unwrap()
}

fn chunk(id: usize, embedding: Embedding, tags: BTreeSet<Tag>) -> KnowledgeChunk {
    KnowledgeChunk {
        chunk_id: format!("c{id}"),
        doc_id: format!("d{}", id / 10),
        text: format!("chunk {id}"),
        embedding,
        tags,
        ordinal: id % 10,
    }
}

/// Plain dot product over unit vectors, sorted by score then insertion order.
fn brute_force(corpus: &[Embedding], q: &Embedding, k: usize) -> Vec<(usize, f64)> {
    let mut scored: Vec<(usize, f64)> = corpus
        .iter()
        .enumerate()
        .map(|(i, e)| (i, e.values.iter().zip(&q.values).map(|(a, b)| a * b).sum()))
        .collect();
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    scored.truncate(k);
    scored
}

#[test]
fn matches_linear_scan_oracle() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let corpus: Vec<Embedding> = (0..1000).map(|_| random_unit(&mut rng, 64)).collect();
    let index = KnowledgeIndex::new();
    for (i, e) in corpus.iter().enumerate() {
        index.add(chunk(i, e.clone(), BTreeSet::new())).unwrap();
    }
    for _ in 0..50 {
        let q = random_unit(&mut rng, 64);
        let got = index.search(&q, 10, None).unwrap();
        let want = brute_force(&corpus, &q, 10);
        assert_eq!(got.len(), 10);
        for (r, (res, (i, s))) in got.iter().zip(&want).enumerate() {
            assert_eq!(res.rank, r + 1);
            assert_eq!(res.chunk_id, format!("c{i}"));
            assert!((res.similarity - s).abs() < 1e-9);
        }
    }
    assert!(started.elapsed().as_secs_f64() < 5.0);
}

#[test]
fn ten_thousand_adds() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let index = KnowledgeIndex::new();
    for i in 0..10_000 {
        index.add(chunk(i, random_unit(&mut rng, 8), BTreeSet::new())).unwrap();
    }
    assert_eq!(index.len(), 10_000);
    assert_eq!(index.get("c9999").unwrap().ordinal, 9);
}

#[test]
fn k_larger_than_index() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let index = KnowledgeIndex::new();
    for i in 0..5 {
        index.add(chunk(i, random_unit(&mut rng, 8), BTreeSet::new())).unwrap();
    }
    assert_eq!(index.search(&random_unit(&mut rng, 8), 10, None).unwrap().len(), 5);
}

#[test]
fn save_and_load_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let index = KnowledgeIndex::new();
    for i in 0..20 {
        let tags = BTreeSet::from([Tag(Dimension::ALL[i % 21])]);
        index.add(chunk(i, random_unit(&mut rng, 16), tags)).unwrap();
    }
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("index.json");
    index.save(&path).unwrap();
    let back = KnowledgeIndex::load(&path).unwrap();
    assert_eq!(back.snapshot().chunks(), index.snapshot().chunks());
}

fn vec_strategy(dim: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(-1.0f64..1.0, dim).prop_filter("non-zero", |v| v.iter().any(|x| x.abs() > 1e-3))
}

proptest! {
    #[test]
    fn cosine_is_symmetric(a in vec_strategy(12), b in vec_strategy(12)) {
        prop_assert!((cosine(&a, &b) - cosine(&b, &a)).abs() < 1e-12);
    }

    #[test]
    fn filter_is_sound(
        vs in proptest::collection::vec((vec_strategy(6), 0usize..21), 1..40),
        q in vec_strategy(6),
        wanted in proptest::collection::btree_set(0usize..21, 1..5),
        k in 1usize..12,
    ) {
        let index = KnowledgeIndex::new();
        for (i, (v, d)) in vs.iter().enumerate() {
            let tags = BTreeSet::from([Tag(Dimension::ALL[*d])]);
            index.add(chunk(i, Embedding::normalized(v.clone()).unwrap(), tags)).unwrap();
        }
        let filter: BTreeSet<Tag> = wanted.iter().map(|d| Tag(Dimension::ALL[*d])).collect();
        let results = index.search(&Embedding::normalized(q).unwrap(), k, Some(&filter)).unwrap();
        let eligible = vs.iter().filter(|(_, d)| wanted.contains(d)).count();
        prop_assert_eq!(results.len(), eligible.min(k));
        for r in &results {
            let c = index.get(&r.chunk_id).unwrap();
            prop_assert!(c.tags.iter().any(|t| filter.contains(t)));
        }
        for w in results.windows(2) {
            prop_assert!(w[0].similarity >= w[1].similarity);
        }
    }

    #[test]
    fn chunks_cover_the_source(words in proptest::collection::vec("[a-z]{1,6}", 1..400), max in 2usize..60, overlap_frac in 0.0f64..0.9) {
        let overlap = ((max as f64) * overlap_frac) as usize;
        let overlap = overlap.min(max - 1);
        let chunks = chunk_document("d", &words.join(" "), max, overlap).unwrap();
        let mut rebuilt: Vec<String> = Vec::new();
        for (i, c) in chunks.iter().enumerate() {
            let w: Vec<&str> = c.text.split(' ').collect();
            prop_assert!(w.len() <= max);
            let skip = if i == 0 { 0 } else { overlap };
            rebuilt.extend(w[skip..].iter().map(|s| s.to_string()));
        }
        prop_assert_eq!(rebuilt, words);
    }
}
