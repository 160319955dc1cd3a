//! Response bundles: the on-disk unit of work.
//!
//! A [`ResponseBundle`] holds one question, the `m` responses sampled for it,
//! and whatever per-response signals an upstream extractor produced
//! (encoder embeddings, pairwise NLI logits, sequence log-probabilities,
//! external scores). Bundles are stored as JSON Lines; embeddings may be moved
//! into a binary sidecar (see [`sidecar`]).

mod jsonl;
pub mod sidecar;
mod validate;

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use jsonl::{load_bundles, write_bundles, EmbeddingStorage};
pub use validate::validate_bundle;

/// Version written into dataset headers and sidecar files.
pub const FORMAT_VERSION: u16 = 1;

/// Total sequence log-probability and token count for every response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeqLogProbs {
    pub logprobs: Vec<f64>,
    pub token_counts: Vec<u64>,
}

/// One question and its sampled responses.
///
/// `nli_logits[i][j][dir]` holds raw (entailment, neutral, contradiction)
/// logits; `dir = 0` has `responses[i]` as premise and `responses[j]` as
/// hypothesis, `dir = 1` is the reverse.
///
/// Optional payloads are kept in their nested on-disk shape so that malformed
/// input can be reported by [`validate_bundle`] instead of failing to parse.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResponseBundle {
    pub question_id: String,
    pub question_text: String,
    pub references: Vec<String>,
    pub responses: Vec<String>,
    pub embeddings: Option<Vec<Vec<f64>>>,
    pub nli_logits: Option<Vec<Vec<Vec<Vec<f64>>>>>,
    pub seq_logprobs: Option<SeqLogProbs>,
    pub external_scores: Option<BTreeMap<String, Vec<f64>>>,
}

impl ResponseBundle {
    pub fn new(
        question_id: impl Into<String>,
        question_text: impl Into<String>,
        references: Vec<String>,
        responses: Vec<String>,
    ) -> Self {
        Self {
            question_id: question_id.into(),
            question_text: question_text.into(),
            references,
            responses,
            ..Default::default()
        }
    }

    /// Number of sampled responses.
    pub fn m(&self) -> usize {
        self.responses.len()
    }

    /// Embedding width, if embeddings are present and nonempty.
    pub fn embedding_dim(&self) -> Option<usize> {
        self.embeddings
            .as_ref()
            .and_then(|rows| rows.first().map(|r| r.len()))
    }

    /// Embeddings as an `m × d` matrix. Assumes the bundle validated.
    pub fn embedding_matrix(&self) -> Option<Array2<f64>> {
        let rows = self.embeddings.as_ref()?;
        let d = rows.first().map_or(0, |r| r.len());
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        Array2::from_shape_vec((rows.len(), d), flat).ok()
    }

    pub fn external_score(&self, name: &str) -> Option<&[f64]> {
        self.external_scores
            .as_ref()
            .and_then(|s| s.get(name))
            .map(|v| v.as_slice())
    }
}

/// Dataset-level provenance, stored as an optional header line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetMetadata {
    pub format_version: u16,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub encoder_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nli_model_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub created: Option<String>,
}

impl Default for DatasetMetadata {
    fn default() -> Self {
        Self {
            format_version: FORMAT_VERSION,
            encoder_id: None,
            nli_model_id: None,
            created: None,
        }
    }
}

/// A validated, ordered collection of bundles. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    metadata: DatasetMetadata,
    bundles: Vec<ResponseBundle>,
}

impl Dataset {
    /// Validates every bundle plus the cross-bundle invariants (nonempty,
    /// unique ids, a single embedding width).
    pub fn new(metadata: DatasetMetadata, bundles: Vec<ResponseBundle>) -> Result<Self> {
        if bundles.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let mut seen = HashSet::with_capacity(bundles.len());
        let mut width: Option<usize> = None;
        for b in &bundles {
            let report = validate_bundle(b);
            if !report.is_empty() {
                return Err(Error::InvalidBundle {
                    question_id: b.question_id.clone(),
                    violations: report.violations,
                });
            }
            if !seen.insert(b.question_id.as_str()) {
                return Err(Error::DuplicateQuestionId(b.question_id.clone()));
            }
            if let Some(d) = b.embedding_dim() {
                match width {
                    None => width = Some(d),
                    Some(w) if w != d => {
                        return Err(Error::EmbeddingWidth {
                            question_id: b.question_id.clone(),
                            expected: w,
                            found: d,
                        })
                    }
                    _ => {}
                }
            }
        }
        Ok(Self { metadata, bundles })
    }

    pub fn metadata(&self) -> &DatasetMetadata {
        &self.metadata
    }

    pub fn bundles(&self) -> &[ResponseBundle] {
        &self.bundles
    }

    pub fn len(&self) -> usize {
        self.bundles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bundles.is_empty()
    }

    /// Shared embedding width across bundles that carry embeddings.
    pub fn embedding_dim(&self) -> Option<usize> {
        self.bundles.iter().find_map(|b| b.embedding_dim())
    }

    pub fn into_bundles(self) -> Vec<ResponseBundle> {
        self.bundles
    }
}

/// A single broken invariant, naming the offending field.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub field: String,
    pub reason: String,
}

impl Violation {
    pub(crate) fn new(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.reason)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn len(&self) -> usize {
        self.violations.len()
    }
}
