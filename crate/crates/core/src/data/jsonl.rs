use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::sidecar::{sidecar_path, SidecarReader, SidecarWriter};
use super::{Dataset, DatasetMetadata, ResponseBundle, SeqLogProbs};
use crate::error::{Error, Result};

/// Where [`write_bundles`] puts embedding payloads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EmbeddingStorage {
    /// Nested f64 arrays inside each JSON line.
    #[default]
    Inline,
    /// f32 records in a `.embed` file next to the bundle file.
    Sidecar,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HeaderLine {
    dataset_metadata: DatasetMetadata,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum EmbeddingsField {
    Inline(Vec<Vec<f64>>),
    Sidecar { sidecar_offset: u64 },
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BundleRecord {
    question_id: String,
    question_text: String,
    references: Vec<String>,
    responses: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    embeddings: Option<EmbeddingsField>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    nli_logits: Option<Vec<Vec<Vec<Vec<f64>>>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seq_logprobs: Option<SeqLogProbs>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    external_scores: Option<BTreeMap<String, Vec<f64>>>,
}

/// Loads and validates a JSON Lines bundle file.
///
/// The first line may be a `{"dataset_metadata": {...}}` header; every other
/// nonblank line is one bundle. Sidecar references resolve against the
/// `.embed` file sharing the bundle file's stem.
pub fn load_bundles(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut metadata = None;
    let mut bundles = Vec::new();
    let mut sidecar: Option<SidecarReader> = None;

    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: line_no,
            message,
        };
        if metadata.is_none() && bundles.is_empty() {
            if let Ok(h) = serde_json::from_str::<HeaderLine>(&line) {
                metadata = Some(h.dataset_metadata);
                continue;
            }
        }
        let rec: BundleRecord =
            serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))?;
        let embeddings = match rec.embeddings {
            None => None,
            Some(EmbeddingsField::Inline(rows)) => Some(rows),
            Some(EmbeddingsField::Sidecar { sidecar_offset }) => {
                if sidecar.is_none() {
                    sidecar = Some(SidecarReader::open(&sidecar_path(path))?);
                }
                let reader = sidecar.as_ref().expect("sidecar opened above");
                Some(reader.read(sidecar_offset)?)
            }
        };
        bundles.push(ResponseBundle {
            question_id: rec.question_id,
            question_text: rec.question_text,
            references: rec.references,
            responses: rec.responses,
            embeddings,
            nli_logits: rec.nli_logits,
            seq_logprobs: rec.seq_logprobs,
            external_scores: rec.external_scores,
        });
    }

    Dataset::new(metadata.unwrap_or_default(), bundles)
}

/// Writes a dataset as JSON Lines, preceded by its metadata header. With
/// [`EmbeddingStorage::Sidecar`] the embeddings go to `<stem>.embed`.
pub fn write_bundles(
    path: impl AsRef<Path>,
    dataset: &Dataset,
    storage: EmbeddingStorage,
) -> Result<()> {
    let path = path.as_ref();
    let mut out = Vec::new();
    let mut sidecar = SidecarWriter::new();
    let mut wrote_sidecar = false;

    let header = HeaderLine {
        dataset_metadata: dataset.metadata().clone(),
    };
    serde_json::to_writer(&mut out, &header).expect("header serializes");
    out.push(b'\n');

    for b in dataset.bundles() {
        let embeddings = b.embeddings.as_ref().map(|rows| match storage {
            EmbeddingStorage::Inline => EmbeddingsField::Inline(rows.clone()),
            EmbeddingStorage::Sidecar => {
                wrote_sidecar = true;
                EmbeddingsField::Sidecar {
                    sidecar_offset: sidecar.append(rows),
                }
            }
        });
        let rec = BundleRecord {
            question_id: b.question_id.clone(),
            question_text: b.question_text.clone(),
            references: b.references.clone(),
            responses: b.responses.clone(),
            embeddings,
            nli_logits: b.nli_logits.clone(),
            seq_logprobs: b.seq_logprobs.clone(),
            external_scores: b.external_scores.clone(),
        };
        serde_json::to_writer(&mut out, &rec).expect("bundle serializes");
        out.push(b'\n');
    }

    if wrote_sidecar {
        let sp = sidecar_path(path);
        std::fs::write(&sp, sidecar.into_bytes()).map_err(|e| Error::io(&sp, e))?;
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&out).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bundle(id: &str, m: usize, d: usize) -> ResponseBundle {
        let mut b = ResponseBundle::new(
            id,
            "q?",
            vec!["yes".into()],
            (0..m).map(|i| format!("r{i}")).collect(),
        );
        b.embeddings = Some(
            (0..m)
                .map(|i| (0..d).map(|k| (i * d + k) as f64 * 0.125 - 1.0).collect())
                .collect(),
        );
        b
    }

    #[test]
    fn two_line_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("b.jsonl");
        let ds = Dataset::new(
            DatasetMetadata::default(),
            vec![bundle("a", 5, 8), bundle("b", 5, 8)],
        )
        .unwrap();
        write_bundles(&p, &ds, EmbeddingStorage::Inline).unwrap();
        let back = load_bundles(&p).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back, ds);
    }

    #[test]
    fn sidecar_round_trip_for_f32_values() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("b.jsonl");
        let ds = Dataset::new(DatasetMetadata::default(), vec![bundle("a", 3, 4)]).unwrap();
        write_bundles(&p, &ds, EmbeddingStorage::Sidecar).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.contains(r#""embeddings":{"sidecar_offset":6}"#));
        assert!(dir.path().join("b.embed").exists());
        assert_eq!(load_bundles(&p).unwrap(), ds);
    }

    #[test]
    fn mixed_widths_name_the_question() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("b.jsonl");
        let line = r#"{"question_id":"q7","question_text":"x","references":["a"],"responses":["a","b"],"embeddings":[[1,2,3,4,5,6,7,8],[1,2,3,4,5,6,7]]}"#;
        std::fs::write(&p, format!("{line}\n")).unwrap();
        let err = load_bundles(&p).unwrap_err();
        assert!(matches!(&err, Error::InvalidBundle { question_id, .. } if question_id == "q7"));
        assert!(err.to_string().contains("width 7"));
    }

    #[test]
    fn parse_error_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("b.jsonl");
        let good = r#"{"question_id":"q1","question_text":"x","references":["a"],"responses":["a","b"]}"#;
        std::fs::write(&p, format!("{good}\n{{not json\n")).unwrap();
        match load_bundles(&p).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn duplicate_ids_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("b.jsonl");
        let good = r#"{"question_id":"q1","question_text":"x","references":["a"],"responses":["a","b"]}"#;
        std::fs::write(&p, format!("{good}\n{good}\n")).unwrap();
        assert!(matches!(load_bundles(&p), Err(Error::DuplicateQuestionId(id)) if id == "q1"));
    }

    #[test]
    fn twenty_responses_without_optionals() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("b.jsonl");
        let responses: Vec<String> = (0..20).map(|i| format!("\"answer {i}\"")).collect();
        let line = format!(
            r#"{{"question_id":"tq1","question_text":"Who?","references":["Paris"],"responses":[{}]}}"#,
            responses.join(",")
        );
        std::fs::write(&p, line).unwrap();
        let ds = load_bundles(&p).unwrap();
        assert_eq!(ds.bundles()[0].m(), 20);
        assert!(ds.bundles()[0].embeddings.is_none());
    }

    #[test]
    fn order_preserved() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("b.jsonl");
        let ids = ["z", "a", "m"];
        let ds = Dataset::new(
            DatasetMetadata::default(),
            ids.iter().map(|id| bundle(id, 2, 2)).collect(),
        )
        .unwrap();
        write_bundles(&p, &ds, EmbeddingStorage::Inline).unwrap();
        let back: Vec<_> = load_bundles(&p)
            .unwrap()
            .bundles()
            .iter()
            .map(|b| b.question_id.clone())
            .collect();
        assert_eq!(back, ids);
    }
}
