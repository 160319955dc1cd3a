//! Contrastive semantic similarity features.
//!
//! Each response embedding is L2-normalized, every response pair `(i, j)`
//! gets the elementwise product `f_ij = e_i ⊙ e_j` as its similarity feature,
//! a PCA basis compresses those features, and a projection turns each
//! compressed feature into a scalar affinity.
//!
//! With unit inputs the components of `f_ij` sum to `cos(e_i, e_j)`. The
//! default [`ProjectionStrategy::UnitSum`] keeps that reading: it sums the
//! components of the rank-`k` reconstruction of `f_ij`, so a full-rank basis
//! reproduces clamped cosine similarity exactly. The step from vector feature
//! to scalar affinity is a modelling choice, which is why a second strategy
//! is provided.

mod pca;

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::affinity::{AffinityMatrix, AffinitySource};
use crate::error::{Error, Result};

pub use pca::{fit_pca, read_pca_model, write_pca_model, PcaModel, PairGram};

const MIN_ROW_NORM: f64 = 1e-12;
const UNIT_TOLERANCE: f64 = 1e-6;

/// Scales each row to unit L2 norm.
pub fn normalize_embeddings(e: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    let mut out = e.to_owned();
    for (i, mut row) in out.axis_iter_mut(Axis(0)).enumerate() {
        let norm = row.dot(&row).sqrt();
        if norm.is_nan() || norm <= MIN_ROW_NORM {
            return Err(Error::ZeroNormRow(i));
        }
        row.mapv_inplace(|x| x / norm);
    }
    Ok(out)
}

/// Hadamard features for every pair `i ≤ j`, stored once per unordered pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PairFeatureSet {
    m: usize,
    features: Array2<f64>,
}

impl PairFeatureSet {
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    /// Row index of pair `(i, j)`; order of `i` and `j` does not matter.
    pub fn row_index(&self, i: usize, j: usize) -> usize {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        i * (2 * self.m - i - 1) / 2 + j
    }

    pub fn get(&self, i: usize, j: usize) -> ArrayView1<'_, f64> {
        self.features.row(self.row_index(i, j))
    }

    /// All features, one row per pair in `(0,0), (0,1), …, (m-1,m-1)` order.
    pub fn features(&self) -> ArrayView2<'_, f64> {
        self.features.view()
    }
}

/// Builds `f_ij = e_i ⊙ e_j` for all `i ≤ j`. Rows must be unit-norm.
pub fn hadamard_features(e: ArrayView2<'_, f64>) -> Result<PairFeatureSet> {
    let (m, d) = e.dim();
    for (i, row) in e.axis_iter(Axis(0)).enumerate() {
        let norm = row.dot(&row).sqrt();
        if (norm - 1.0).abs() > UNIT_TOLERANCE {
            return Err(Error::NotNormalized { row: i, norm });
        }
    }
    let mut features = Array2::zeros((m * (m + 1) / 2, d));
    let mut r = 0;
    for i in 0..m {
        for j in i..m {
            let mut row = features.row_mut(r);
            row.assign(&(&e.row(i) * &e.row(j)));
            r += 1;
        }
    }
    Ok(PairFeatureSet { m, features })
}

/// How a compressed pair feature becomes a scalar affinity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ProjectionStrategy {
    /// `1ᵀ·B·Bᵀ·f_ij`: component sum of the rank-`k` reconstruction.
    #[default]
    UnitSum,
    /// Cosine between `Bᵀ·f_ij` and the mean of the self-pair codes `Bᵀ·f_ii`.
    PrototypeCosine,
}

impl fmt::Display for ProjectionStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProjectionStrategy::UnitSum => "unit-sum",
            ProjectionStrategy::PrototypeCosine => "prototype-cosine",
        })
    }
}

impl FromStr for ProjectionStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unit-sum" => Ok(Self::UnitSum),
            "prototype-cosine" => Ok(Self::PrototypeCosine),
            _ => Err(Error::Unknown {
                kind: "projection strategy",
                value: s.to_owned(),
            }),
        }
    }
}

/// Projects pair features through a fitted basis into an [`AffinityMatrix`].
pub fn project_affinity(
    pairs: &PairFeatureSet,
    model: &PcaModel,
    strategy: ProjectionStrategy,
) -> Result<AffinityMatrix> {
    if pairs.dim() != model.d() {
        return Err(Error::DimensionMismatch {
            expected: model.d(),
            found: pairs.dim(),
        });
    }
    let codes = pairs.features().dot(&model.basis());
    let m = pairs.m();
    let w = match strategy {
        ProjectionStrategy::UnitSum => {
            let u = model.basis().sum_axis(Axis(0));
            AffinityMatrix::from_upper(m, AffinitySource::Css, |i, j| {
                codes.row(pairs.row_index(i, j)).dot(&u)
            })
        }
        ProjectionStrategy::PrototypeCosine => {
            let mut proto = Array1::<f64>::zeros(model.k());
            for i in 0..m {
                proto += &codes.row(pairs.row_index(i, i));
            }
            proto /= m as f64;
            AffinityMatrix::from_upper(m, AffinitySource::Css, |i, j| {
                cosine(codes.row(pairs.row_index(i, j)), proto.view())
            })
        }
    };
    Ok(w)
}

fn cosine(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    let denom = a.dot(&a).sqrt() * b.dot(&b).sqrt();
    if denom > 0.0 {
        a.dot(&b) / denom
    } else {
        0.0
    }
}
