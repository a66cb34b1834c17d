//! Mock gateway contract checks.

use std::collections::BTreeSet;

use saathi_core::gateway::{Gateway, MockGateway, PromptRequest, KEY_TRANSLATED};
use saathi_core::knowledge::cosine;
use saathi_core::stack::shipped_mock;
use sha2::{Digest, Sha256};

const PAIRS: &str = "tests/data/embedding_pairs.tsv";

#[test]
fn hundred_identical_calls_agree() {
    let gw = shipped_mock();
    let req = PromptRequest::new("Translate to English.", "Condom Kya hota hai?", KEY_TRANSLATED, 200).unwrap();
    let digests: BTreeSet<String> = (0..100)
        .map(|_| hex::encode(Sha256::digest(gw.complete(&req).unwrap().as_bytes())))
        .collect();
    assert_eq!(digests.len(), 1);
}

#[test]
fn embeddings_are_pure_and_unit() {
    let a = MockGateway::new(0, 256);
    let b = MockGateway::new(0, 256);
    for s in ["Condom Kya hota hai?", "a", "Copper-T, IUD; aur goli!"] {
        let e = a.embed(s).unwrap();
        assert_eq!(e, b.embed(s).unwrap());
        assert!((e.norm() - 1.0).abs() < 1e-9);
    }
}

/// Disjoint-token pairs: cosine values frozen from the mock, all below 0.3.
/// Set `UPDATE_GOLDEN=1` to recompute the third column.
#[test]
fn disjoint_pairs_stay_dissimilar() {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join(PAIRS);
    let text = std::fs::read_to_string(&path).unwrap();
    let gw = MockGateway::new(0, 256);
    let mut rows = Vec::new();
    for line in text.lines() {
        let cols: Vec<&str> = line.split('\t').collect();
        let (a, b) = (cols[0], cols[1]);
        let ta: BTreeSet<&str> = a.split(' ').collect();
        assert!(b.split(' ').all(|w| !ta.contains(w)), "pair shares a token: {line}");
        let c = cosine(&gw.embed(a).unwrap().values, &gw.embed(b).unwrap().values);
        assert!(c.abs() < 0.3, "{line}: {c}");
        if let Some(frozen) = cols.get(2) {
            assert!((frozen.parse::<f64>().unwrap() - c).abs() < 1e-12, "{line}");
        }
        rows.push(format!("{a}\t{b}\t{c:.15}"));
    }
    assert_eq!(rows.len(), 50);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&path, rows.join("\n") + "\n").unwrap();
    }
}
