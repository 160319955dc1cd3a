//! NLI-based comparison methods: pairwise NLI affinities, bidirectional
//! entailment clustering, semantic entropy and the distinct-answer count.

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;

use crate::affinity::{AffinityMatrix, AffinitySource};
use crate::error::{Error, Result};

pub const ENTAILMENT: usize = 0;
pub const NEUTRAL: usize = 1;
pub const CONTRADICTION: usize = 2;

/// Dense `m × m × 2 × 3` logit tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct NliLogits {
    m: usize,
    data: Vec<f64>,
}

impl NliLogits {
    /// Flattens the nested on-disk form, checking shape and finiteness.
    pub fn from_nested(nested: &[Vec<Vec<Vec<f64>>>]) -> Result<Self> {
        let m = nested.len();
        let mut data = Vec::with_capacity(m * m * 6);
        for row in nested {
            if row.len() != m {
                return Err(Error::DimensionMismatch {
                    expected: m,
                    found: row.len(),
                });
            }
            for pair in row {
                if pair.len() != 2 {
                    return Err(Error::DimensionMismatch {
                        expected: 2,
                        found: pair.len(),
                    });
                }
                for classes in pair {
                    if classes.len() != 3 {
                        return Err(Error::DimensionMismatch {
                            expected: 3,
                            found: classes.len(),
                        });
                    }
                    data.extend_from_slice(classes);
                }
            }
        }
        Self::from_flat(m, data)
    }

    pub fn from_flat(m: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != m * m * 6 {
            return Err(Error::DimensionMismatch {
                expected: m * m * 6,
                found: data.len(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("nli_logits".into()));
        }
        Ok(Self { m, data })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Logits for premise/hypothesis order `dir` of pair `(i, j)`.
    pub fn get(&self, i: usize, j: usize, dir: usize) -> [f64; 3] {
        let at = ((i * self.m + j) * 2 + dir) * 3;
        [self.data[at], self.data[at + 1], self.data[at + 2]]
    }

    fn entails(&self, i: usize, j: usize, dir: usize) -> bool {
        let l = self.get(i, j, dir);
        l[ENTAILMENT] >= l[NEUTRAL] && l[ENTAILMENT] >= l[CONTRADICTION]
    }
}

pub fn softmax3(l: [f64; 3]) -> [f64; 3] {
    let max = l[0].max(l[1]).max(l[2]);
    let e = l.map(|x| (x - max).exp());
    let z = e[0] + e[1] + e[2];
    e.map(|x| x / z)
}

/// Mapping from class probabilities to a directional similarity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NliSimilarity {
    /// `(p_ent + 1 − p_con) / 2`; neutral counts as half-similar.
    #[default]
    EntailNeutralHalf,
    /// `p_ent`.
    Entailment,
    /// `1 − p_con`.
    NotContradiction,
}

impl NliSimilarity {
    fn apply(self, p: [f64; 3]) -> f64 {
        match self {
            NliSimilarity::EntailNeutralHalf => (p[ENTAILMENT] + 1.0 - p[CONTRADICTION]) / 2.0,
            NliSimilarity::Entailment => p[ENTAILMENT],
            NliSimilarity::NotContradiction => 1.0 - p[CONTRADICTION],
        }
    }
}

impl fmt::Display for NliSimilarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NliSimilarity::EntailNeutralHalf => "entail-neutral-half",
            NliSimilarity::Entailment => "entailment",
            NliSimilarity::NotContradiction => "not-contradiction",
        })
    }
}

impl FromStr for NliSimilarity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "entail-neutral-half" => Ok(Self::EntailNeutralHalf),
            "entailment" => Ok(Self::Entailment),
            "not-contradiction" => Ok(Self::NotContradiction),
            _ => Err(Error::Unknown {
                kind: "nli similarity",
                value: s.to_owned(),
            }),
        }
    }
}

/// Directional similarities `s[i][j]` (premise `r_i`, hypothesis `r_j`).
#[derive(Debug, Clone, PartialEq)]
pub struct NliPairScores {
    s: Array2<f64>,
}

impl NliPairScores {
    pub fn from_matrix(s: Array2<f64>) -> Result<Self> {
        let m = s.nrows();
        if s.ncols() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                found: s.ncols(),
            });
        }
        if s.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Config("pair scores must lie in [0, 1]".into()));
        }
        let mut s = s;
        s.diag_mut().fill(1.0);
        Ok(Self { s })
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.s[[i, j]]
    }

    pub fn m(&self) -> usize {
        self.s.nrows()
    }
}

pub fn nli_pair_scores(logits: &NliLogits, mapping: NliSimilarity) -> NliPairScores {
    let m = logits.m();
    let s = Array2::from_shape_fn((m, m), |(i, j)| {
        if i == j {
            1.0
        } else {
            mapping.apply(softmax3(logits.get(i, j, 0))).clamp(0.0, 1.0)
        }
    });
    NliPairScores { s }
}

/// `w_ij = (s_ij + s_ji) / 2`.
pub fn nli_affinity(scores: &NliPairScores) -> AffinityMatrix {
    AffinityMatrix::from_upper(scores.m(), AffinitySource::Nli, |i, j| {
        (scores.get(i, j) + scores.get(j, i)) / 2.0
    })
}

/// Partition of responses into semantic sets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Clustering {
    assignment: Vec<usize>,
    cluster_count: usize,
}

impl Clustering {
    /// Accepts ids that are contiguous from 0.
    pub fn new(assignment: Vec<usize>) -> Result<Self> {
        let cluster_count = assignment.iter().max().map_or(0, |&x| x + 1);
        let mut used = vec![false; cluster_count];
        for &c in &assignment {
            used[c] = true;
        }
        if used.iter().any(|u| !u) {
            return Err(Error::Config("cluster ids must be contiguous from 0".into()));
        }
        Ok(Self {
            assignment,
            cluster_count,
        })
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn cluster_count(&self) -> usize {
        self.cluster_count
    }

    /// Partition as sorted member lists, independent of id labelling.
    pub fn partition(&self) -> Vec<Vec<usize>> {
        let mut sets = vec![Vec::new(); self.cluster_count];
        for (i, &c) in self.assignment.iter().enumerate() {
            sets[c].push(i);
        }
        sets.sort();
        sets
    }
}

/// Greedy bidirectional-entailment clustering: each response joins the first
/// cluster whose lowest-index member it mutually entails, otherwise it seeds
/// a new cluster. Entailment means the entailment logit is the (first) argmax.
pub fn bidirectional_clusters(logits: &NliLogits) -> Clustering {
    let m = logits.m();
    let mut assignment = Vec::with_capacity(m);
    let mut representatives: Vec<usize> = Vec::new();
    for i in 0..m {
        let found = representatives
            .iter()
            .position(|&rep| logits.entails(i, rep, 0) && logits.entails(i, rep, 1));
        match found {
            Some(c) => assignment.push(c),
            None => {
                assignment.push(representatives.len());
                representatives.push(i);
            }
        }
    }
    let cluster_count = representatives.len();
    Clustering {
        assignment,
        cluster_count,
    }
}

pub fn num_sem_uncertainty(clustering: &Clustering) -> f64 {
    clustering.cluster_count() as f64
}

/// `−(1/|C|) Σ_c log p(C_c | x)` with cluster masses from summed sequence
/// likelihoods, renormalized over clusters.
pub fn semantic_entropy(
    clustering: &Clustering,
    seq_logprobs: &[f64],
    token_counts: &[u64],
    length_normalize: bool,
) -> Result<f64> {
    let m = clustering.assignment().len();
    if seq_logprobs.len() != m || (length_normalize && token_counts.len() != m) {
        return Err(Error::DimensionMismatch {
            expected: m,
            found: seq_logprobs.len(),
        });
    }
    let ll: Vec<f64> = seq_logprobs
        .iter()
        .enumerate()
        .map(|(i, &lp)| {
            if length_normalize {
                lp / token_counts[i] as f64
            } else {
                lp
            }
        })
        .collect();
    let mut members: Vec<Vec<f64>> = vec![Vec::new(); clustering.cluster_count()];
    for (i, &c) in clustering.assignment().iter().enumerate() {
        members[c].push(ll[i]);
    }
    let log_mass: Vec<f64> = members.iter().map(|v| log_sum_exp(v)).collect();
    let log_total = log_sum_exp(&log_mass);
    let sum: f64 = log_mass.iter().map(|lm| lm - log_total).sum();
    Ok(0.0 - sum / log_mass.len() as f64)
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}
