//! Graph-Laplacian uncertainty scores over an [`AffinityMatrix`].
//!
//! * `U_Deg = Σ_i (m − D_ii) / m²`, average disagreement.
//! * `U_Eig = Σ_k max(0, 1 − λ_k)`, a soft count of semantic clusters.
//! * `U_Ecc`, the spread of spectral-embedding coordinates around their
//!   centroid, using the `ceil(U_Eig)` eigenvectors with smallest eigenvalues.
//!
//! The Laplacian is the symmetric normalized one by default, whose spectrum
//! lies in `[0, 2]` and whose zero-eigenvalue multiplicity counts connected
//! components; `D − W` is available for comparison.

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;

use crate::affinity::{AffinityMatrix, AffinitySource};
use crate::error::{Error, Result};
use crate::linalg::{symmetric_eigen, JacobiOptions};

/// Eigenvalues this close to zero are rounding residue and are set to 0.
const ZERO_SNAP: f64 = 1e-10;
/// `1 − λ` terms at or below this are rounding residue of `λ ≈ 1`.
const EIG_NOISE_FLOOR: f64 = 1e-10;
/// Slack subtracted before `ceil(U_Eig)` so that `3 + 1e-15` selects 3 vectors.
const CEIL_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LaplacianKind {
    /// `I − D^{-1/2}·W·D^{-1/2}`
    #[default]
    Normalized,
    /// `D − W`
    Unnormalized,
}

impl fmt::Display for LaplacianKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LaplacianKind::Normalized => "normalized",
            LaplacianKind::Unnormalized => "unnormalized",
        })
    }
}

impl FromStr for LaplacianKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "normalized" => Ok(Self::Normalized),
            "unnormalized" => Ok(Self::Unnormalized),
            _ => Err(Error::Unknown {
                kind: "laplacian",
                value: s.to_owned(),
            }),
        }
    }
}

/// Degrees `D_ii = Σ_j W_ij`.
pub fn degrees(w: &AffinityMatrix) -> Vec<f64> {
    w.view().rows().into_iter().map(|r| r.sum()).collect()
}

pub fn degree_uncertainty(w: &AffinityMatrix) -> f64 {
    let m = w.m() as f64;
    degrees(w).iter().map(|d| m - d).sum::<f64>() / (m * m)
}

pub fn laplacian(w: &AffinityMatrix, kind: LaplacianKind) -> Array2<f64> {
    let m = w.m();
    let d = degrees(w);
    match kind {
        LaplacianKind::Normalized => Array2::from_shape_fn((m, m), |(i, j)| {
            let scaled = w.get(i, j) / (d[i] * d[j]).sqrt();
            if i == j {
                1.0 - scaled
            } else {
                -scaled
            }
        }),
        LaplacianKind::Unnormalized => Array2::from_shape_fn((m, m), |(i, j)| {
            if i == j {
                d[i] - w.get(i, j)
            } else {
                -w.get(i, j)
            }
        }),
    }
}

/// Ascending eigenvalues with matching unit eigenvectors (columns).
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Array2<f64>,
    pub kind: LaplacianKind,
}

pub fn laplacian_spectrum(w: &AffinityMatrix, kind: LaplacianKind) -> Result<Spectrum> {
    let l = laplacian(w, kind);
    let eig = symmetric_eigen(&l, JacobiOptions::default())?;
    let eigenvalues = eig
        .values
        .into_iter()
        .map(|v| if v.abs() <= ZERO_SNAP { 0.0 } else { v })
        .collect();
    Ok(Spectrum {
        eigenvalues,
        eigenvectors: eig.vectors,
        kind,
    })
}

pub fn eig_uncertainty(eigenvalues: &[f64]) -> f64 {
    eigenvalues
        .iter()
        .map(|&l| 1.0 - l)
        .filter(|&t| t > EIG_NOISE_FLOOR)
        .sum()
}

/// Centered spectral-embedding spread. Depends only on the span of the
/// selected eigenvectors, so it is invariant to eigenvector sign and to the
/// basis chosen inside a degenerate eigenspace.
pub fn ecc_uncertainty(spectrum: &Spectrum) -> f64 {
    let m = spectrum.eigenvalues.len();
    if m == 0 {
        return 0.0;
    }
    let u_eig = eig_uncertainty(&spectrum.eigenvalues);
    let k = ((u_eig - CEIL_SLACK).ceil() as usize).clamp(1, m);
    let coords = spectrum.eigenvectors.slice(ndarray::s![.., ..k]);
    let center = coords.mean_axis(ndarray::Axis(0)).expect("m > 0");
    let mut sq = 0.0;
    for row in coords.rows() {
        for (x, c) in row.iter().zip(center.iter()) {
            sq += (x - c) * (x - c);
        }
    }
    sq.sqrt()
}

#[derive(Debug, Clone)]
pub struct SpectralResult {
    pub spectrum: Spectrum,
    pub u_deg: f64,
    pub u_eig: f64,
    pub u_ecc: f64,
    pub source: AffinitySource,
}

/// All three scores for one affinity matrix.
pub fn spectral_scores(w: &AffinityMatrix, kind: LaplacianKind) -> Result<SpectralResult> {
    let spectrum = laplacian_spectrum(w, kind)?;
    let u_eig = eig_uncertainty(&spectrum.eigenvalues);
    let u_ecc = ecc_uncertainty(&spectrum);
    Ok(SpectralResult {
        u_deg: degree_uncertainty(w),
        u_eig,
        u_ecc,
        source: w.source(),
        spectrum,
    })
}
