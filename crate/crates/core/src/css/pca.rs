//! Uncentered PCA over pair features.
//!
//! The basis is the top-`k` right singular vectors of the raw (uncentered)
//! feature matrix `F`, obtained from the eigenvectors of `FᵀF`. Centering would
//! break the identity `1ᵀ·f_ij = cos(e_i, e_j)` on the principal subspace.

use std::io::Write;
use std::path::Path;

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"CSSP";
const MAX_QR_ITERATIONS: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    basis: Array2<f64>,
    singular_values: Vec<f64>,
    fit_count: Option<usize>,
}

impl PcaModel {
    /// Input feature width.
    pub fn d(&self) -> usize {
        self.basis.nrows()
    }

    /// Reduced width.
    pub fn k(&self) -> usize {
        self.basis.ncols()
    }

    /// `d × k`, orthonormal columns.
    pub fn basis(&self) -> ArrayView2<'_, f64> {
        self.basis.view()
    }

    /// Descending.
    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    /// Number of feature rows the model was fitted on; `None` for models read
    /// from disk.
    pub fn fit_count(&self) -> Option<usize> {
        self.fit_count
    }

    fn from_gram(gram: &Array2<f64>, k: usize, count: usize) -> Result<Self> {
        let d = gram.nrows();
        if k == 0 {
            return Err(Error::Pca("k must be at least 1".into()));
        }
        if k > d {
            return Err(Error::Pca(format!("k={k} exceeds feature width d={d}")));
        }
        if count == 0 {
            return Err(Error::Pca("empty feature collection".into()));
        }
        let mat = nalgebra::DMatrix::from_fn(d, d, |i, j| gram[[i, j]]);
        let eig = nalgebra::SymmetricEigen::try_new(mat, f64::EPSILON, MAX_QR_ITERATIONS).ok_or(
            Error::NoConvergence {
                sweeps: MAX_QR_ITERATIONS,
                context: Some("PCA fit".into()),
            },
        )?;
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
        let mut basis = Array2::zeros((d, k));
        let mut singular_values = Vec::with_capacity(k);
        for (c, &src) in order.iter().take(k).enumerate() {
            let col = eig.eigenvectors.column(src);
            let mut big = 0;
            for r in 1..d {
                if col[r].abs() > col[big].abs() {
                    big = r;
                }
            }
            let sign = if col[big] < 0.0 { -1.0 } else { 1.0 };
            for r in 0..d {
                basis[[r, c]] = sign * col[r];
            }
            singular_values.push(eig.eigenvalues[src].max(0.0).sqrt());
        }
        Ok(Self {
            basis,
            singular_values,
            fit_count: Some(count),
        })
    }
}

/// Fits on an explicit feature matrix, one feature per row.
pub fn fit_pca(features: ArrayView2<'_, f64>, k: usize) -> Result<PcaModel> {
    let gram = features.t().dot(&features);
    PcaModel::from_gram(&gram, k, features.nrows())
}

/// Running `FᵀF` over the Hadamard pair features (`i ≤ j`) of one or more
/// bundles, built without materializing the features.
///
/// For unit rows `E` (`m × d`):
/// `Σ_{i≤j} f_ij f_ijᵀ = ½·((EᵀE)∘(EᵀE) + (E∘E)ᵀ(E∘E))`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairGram {
    gram: Array2<f64>,
    count: usize,
}

impl PairGram {
    pub fn zeros(d: usize) -> Self {
        Self {
            gram: Array2::zeros((d, d)),
            count: 0,
        }
    }

    pub fn from_embeddings(e: ArrayView2<'_, f64>) -> Self {
        let m = e.nrows();
        let s = e.t().dot(&e);
        let sq = e.mapv(|x| x * x);
        let q = sq.t().dot(&sq);
        let gram = (&s * &s + &q) * 0.5;
        Self {
            gram,
            count: m * (m + 1) / 2,
        }
    }

    pub fn merge(&mut self, other: &PairGram) -> Result<()> {
        if self.gram.dim() != other.gram.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.gram.nrows(),
                found: other.gram.nrows(),
            });
        }
        self.gram += &other.gram;
        self.count += other.count;
        Ok(())
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn gram(&self) -> ArrayView2<'_, f64> {
        self.gram.view()
    }

    pub fn fit(&self, k: usize) -> Result<PcaModel> {
        PcaModel::from_gram(&self.gram, k, self.count)
    }
}

/// `"CSSP"`, u32 d, u32 k, `d·k` f64 basis values (row-major), `k` f64
/// singular values; all little-endian.
pub fn write_pca_model(path: impl AsRef<Path>, model: &PcaModel) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::with_capacity(12 + 8 * model.d() * (model.k() + 1));
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&(model.d() as u32).to_le_bytes());
    buf.extend_from_slice(&(model.k() as u32).to_le_bytes());
    for v in model.basis.iter() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    for v in &model.singular_values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&buf).map_err(|e| Error::io(path, e))
}

pub fn read_pca_model(path: impl AsRef<Path>) -> Result<PcaModel> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let bad = |msg: &str| Error::Pca(format!("{}: {msg}", path.display()));
    if bytes.len() < 12 || &bytes[..4] != MAGIC {
        return Err(bad("missing CSSP magic"));
    }
    let d = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes")) as usize;
    let k = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
    if bytes.len() != 12 + 8 * (d * k + k) {
        return Err(bad("length does not match header"));
    }
    let mut vals = bytes[12..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
    let basis_vals: Vec<f64> = vals.by_ref().take(d * k).collect();
    let singular_values: Vec<f64> = vals.collect();
    let basis = Array2::from_shape_vec((d, k), basis_vals).map_err(|_| bad("bad basis shape"))?;
    Ok(PcaModel {
        basis,
        singular_values,
        fit_count: None,
    })
}
