use std::fmt;

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};

/// Which similarity signal produced an affinity matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AffinitySource {
    Css,
    Nli,
}

impl fmt::Display for AffinitySource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AffinitySource::Css => "css",
            AffinitySource::Nli => "nli",
        })
    }
}

/// Symmetric `m × m` similarity matrix with entries in `[0, 1]` and a unit
/// diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinityMatrix {
    w: Array2<f64>,
    source: AffinitySource,
}

impl AffinityMatrix {
    /// Builds from the upper triangle: `f(i, j)` is called for `i < j`, the
    /// result clamped to `[0, 1]` and mirrored; the diagonal is set to 1.
    pub fn from_upper(m: usize, source: AffinitySource, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut w = Array2::eye(m);
        for i in 0..m {
            for j in i + 1..m {
                let v = clamp01(f(i, j));
                w[[i, j]] = v;
                w[[j, i]] = v;
            }
        }
        Self { w, source }
    }

    /// Wraps an existing matrix after checking every invariant.
    pub fn new(w: Array2<f64>, source: AffinitySource) -> Result<Self> {
        let m = w.nrows();
        if w.ncols() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                found: w.ncols(),
            });
        }
        for i in 0..m {
            if w[[i, i]] != 1.0 {
                return Err(Error::Config(format!("affinity diagonal at {i} is {}", w[[i, i]])));
            }
            for j in i + 1..m {
                let v = w[[i, j]];
                if !(0.0..=1.0).contains(&v) || w[[j, i]] != v {
                    return Err(Error::Config(format!(
                        "affinity entry ({i},{j}) is {v}, mirror {}",
                        w[[j, i]]
                    )));
                }
            }
        }
        Ok(Self { w, source })
    }

    pub fn m(&self) -> usize {
        self.w.nrows()
    }

    pub fn source(&self) -> AffinitySource {
        self.source
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.w.view()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.w[[i, j]]
    }

    /// `P·W·Pᵀ` where `perm[new] = old`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let m = self.m();
        let w = Array2::from_shape_fn((m, m), |(i, j)| self.w[[perm[i], perm[j]]]);
        Self {
            w,
            source: self.source,
        }
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.w
    }
}

pub(crate) fn clamp01(v: f64) -> f64 {
    if v.is_nan() {
        0.0
    } else {
        v.clamp(0.0, 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_upper_clamps_and_mirrors() {
        let a = AffinityMatrix::from_upper(3, AffinitySource::Css, |i, j| (i + j) as f64 - 1.5);
        assert_eq!(a.get(0, 1), 0.0);
        assert_eq!(a.get(0, 2), 0.5);
        assert_eq!(a.get(2, 1), 1.0);
        assert!(AffinityMatrix::new(a.clone().into_inner(), AffinitySource::Css).is_ok());
    }

    #[test]
    fn new_rejects_asymmetry() {
        let mut w = Array2::eye(2);
        w[[0, 1]] = 0.5;
        assert!(AffinityMatrix::new(w, AffinitySource::Nli).is_err());
    }
}
