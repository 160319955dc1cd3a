//! Uncertainty scores for sets of sampled LLM responses.
//!
//! Pairwise affinities between responses come either from contrastive text
//! embeddings ([`css`]) or from NLI logits ([`nli`]). The graph Laplacian of
//! an affinity matrix yields three uncertainty scores ([`spectral`]): degree,
//! eigenvalue sum and eccentricity. Lexical and clustering baselines live in
//! [`text`] and [`nli`]; [`eval`] measures how well any score supports
//! selective answering.
//!
//! ```
//! use spectral_uq::affinity::{AffinityMatrix, AffinitySource};
//! use spectral_uq::spectral::{spectral_scores, LaplacianKind};
//!
//! // two groups of agreeing responses
//! let w = AffinityMatrix::from_upper(4, AffinitySource::Css, |i, j| {
//!     if (i < 2) == (j < 2) { 1.0 } else { 0.0 }
//! });
//! let s = spectral_scores(&w, LaplacianKind::Normalized).unwrap();
//! assert!((s.u_eig - 2.0).abs() < 1e-9);
//! ```

pub mod affinity;
pub mod css;
pub mod data;
pub mod error;
pub mod eval;
pub mod exec;
pub mod fixtures;
pub mod linalg;
pub mod nli;
pub mod pipeline;
pub mod report;
pub mod spectral;
pub mod text;

pub use error::{Error, Result};
