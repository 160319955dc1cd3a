use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spectral_uq::data::{
    load_bundles, validate_bundle, write_bundles, Dataset, DatasetMetadata, EmbeddingStorage, ResponseBundle,
    SeqLogProbs,
};
use spectral_uq::fixtures::{generate_dataset, FixtureSpec};

fn finite(rng: &mut ChaCha8Rng) -> f64 {
    loop {
        let x = f64::from_bits(rng.random());
        if x.is_finite() {
            return x;
        }
    }
}

fn random_bundle(id: usize, m: usize, d: usize, rng: &mut ChaCha8Rng) -> ResponseBundle {
    let mut b = ResponseBundle::new(
        format!("q{id}"),
        format!("question \"{id}\"\twith escapes \u{e9}"),
        vec!["ref".into(), String::new()],
        (0..m).map(|i| format!("response {i}\n")).collect(),
    );
    b.embeddings = Some((0..m).map(|_| (0..d).map(|_| finite(rng)).collect()).collect());
    b.nli_logits = Some(
        (0..m)
            .map(|_| (0..m).map(|_| (0..2).map(|_| (0..3).map(|_| finite(rng)).collect()).collect()).collect())
            .collect(),
    );
    b.seq_logprobs = Some(SeqLogProbs {
        logprobs: (0..m).map(|_| -finite(rng).abs()).collect(),
        token_counts: (0..m).map(|_| rng.random_range(1..1000)).collect(),
    });
    b.external_scores = Some(BTreeMap::from([
        ("gpt_correctness".to_owned(), (0..m).map(|_| rng.random_range(0.0..1.0)).collect()),
        ("p_true".to_owned(), (0..m).map(|_| finite(rng)).collect()),
    ]));
    b
}

#[test]
fn inline_round_trip_is_bit_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let bundles: Vec<ResponseBundle> = (0..6).map(|i| random_bundle(i, 2 + i % 4, 7, &mut rng)).collect();
    let meta = DatasetMetadata {
        encoder_id: Some("enc".into()),
        nli_model_id: Some("nli".into()),
        created: Some("2024-01-01T00:00:00Z".into()),
        ..DatasetMetadata::default()
    };
    let ds = Dataset::new(meta, bundles).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("random.jsonl");
    write_bundles(&p, &ds, EmbeddingStorage::Inline).unwrap();
    let back = load_bundles(&p).unwrap();
    assert_eq!(back, ds);
    for (a, b) in back.bundles().iter().zip(ds.bundles()) {
        let bits = |x: &ResponseBundle| -> Vec<u64> {
            x.embeddings.iter().flatten().flatten().map(|v| v.to_bits()).collect()
        };
        assert_eq!(bits(a), bits(b));
    }
}

#[test]
fn sidecar_stores_f32() {
    let ds = generate_dataset(&FixtureSpec {
        questions: 5,
        d: 16,
        ..FixtureSpec::default()
    })
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("fx.jsonl");
    write_bundles(&p, &ds, EmbeddingStorage::Sidecar).unwrap();
    let back = load_bundles(&p).unwrap();
    for (a, b) in back.bundles().iter().zip(ds.bundles()) {
        let narrowed: Vec<Vec<f64>> = b
            .embeddings
            .as_ref()
            .unwrap()
            .iter()
            .map(|r| r.iter().map(|&x| x as f32 as f64).collect())
            .collect();
        assert_eq!(a.embeddings.as_ref().unwrap(), &narrowed);
        assert_eq!(a.nli_logits, b.nli_logits);
        assert!(validate_bundle(a).is_empty());
    }
}

/// A bundle file as an external extractor would produce it, with the sidecar
/// assembled byte by byte from the documented layout.
#[test]
fn hand_built_sidecar_contract() {
    let dir = tempfile::tempdir().unwrap();
    let mut embed = Vec::new();
    embed.extend_from_slice(b"CSSE");
    embed.extend_from_slice(&1u16.to_le_bytes());
    let first = embed.len();
    embed.extend_from_slice(&2u32.to_le_bytes());
    embed.extend_from_slice(&3u32.to_le_bytes());
    for v in [1.0f32, 0.0, 0.0, 0.0, 1.0, 0.0] {
        embed.extend_from_slice(&v.to_le_bytes());
    }
    let second = embed.len();
    embed.extend_from_slice(&2u32.to_le_bytes());
    embed.extend_from_slice(&3u32.to_le_bytes());
    for v in [0.5f32, 0.5, 0.0, -0.25, 0.0, 1.0] {
        embed.extend_from_slice(&v.to_le_bytes());
    }
    std::fs::write(dir.path().join("toy.embed"), embed).unwrap();
    let lines = format!(
        concat!(
            r#"{{"dataset_metadata":{{"format_version":1,"encoder_id":"some-encoder","nli_model_id":"some-nli"}}}}"#,
            "\n",
            r#"{{"question_id":"a","question_text":"x","references":["r"],"responses":["p","q"],"embeddings":{{"sidecar_offset":{}}}}}"#,
            "\n\n",
            r#"{{"question_id":"b","question_text":"y","references":["r"],"responses":["p","q"],"embeddings":{{"sidecar_offset":{}}}}}"#,
            "\n"
        ),
        first, second
    );
    let p = dir.path().join("toy.jsonl");
    std::fs::write(&p, lines).unwrap();
    let ds = load_bundles(&p).unwrap();
    assert_eq!(ds.metadata().encoder_id.as_deref(), Some("some-encoder"));
    assert_eq!(ds.embedding_dim(), Some(3));
    assert_eq!(ds.bundles()[1].embeddings.as_ref().unwrap()[1], vec![-0.25, 0.0, 1.0]);
}

#[test]
fn twenty_response_bundle_without_optionals() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("m20.jsonl");
    let responses: Vec<String> = (0..20).map(|i| format!("\"answer {i}\"")).collect();
    let line = format!(
        r#"{{"question_id":"tqa-1","question_text":"Who?","references":["someone"],"responses":[{}]}}"#,
        responses.join(",")
    );
    std::fs::write(&p, line).unwrap();
    let ds = load_bundles(&p).unwrap();
    assert_eq!(ds.bundles()[0].m(), 20);
    assert!(validate_bundle(&ds.bundles()[0]).is_empty());
}
