//! Synthetic bundles with planted semantic clusters.
//!
//! Embeddings come from factorizing the target cosine matrix (1 on the
//! diagonal, `within_cosine` inside a cluster, `across_cosine` between
//! clusters), rotated into `d` dimensions by a random orthonormal map, lightly
//! perturbed and renormalized. Responses, NLI logits, log-probabilities and a
//! `gpt_correctness` score are synthesized to agree with the clusters. The
//! reference answer is the canonical answer of cluster 0.

use std::collections::BTreeMap;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::data::{Dataset, DatasetMetadata, ResponseBundle, SeqLogProbs};
use crate::error::{Error, Result};
use crate::linalg::{symmetric_eigen, JacobiOptions};
use crate::text::{tokenize, GPT_SCORE_KEY};

/// Largest allowed gap between a generated cosine and its target.
pub const COSINE_TOLERANCE: f64 = 0.05;
/// Norm of the isotropic perturbation added to each unit embedding.
const NOISE: f64 = 0.02;
const RANK_EPS: f64 = 1e-9;
/// High enough that the within-cluster residue of `U_Eig`, about
/// `(s − 1)(1 − w) / (1 + (s − 1)w)` per cluster of size `s`, stays small.
pub const DEFAULT_WITHIN_COSINE: f64 = 0.98;

const WORDS: [&str; 48] = [
    "amber", "basalt", "cedar", "delta", "ember", "fjord", "granite", "harbor", "indigo", "juniper", "kelp", "lagoon",
    "meadow", "nectar", "onyx", "prairie", "quartz", "raven", "sierra", "tundra", "umber", "violet", "willow",
    "xenon", "yarrow", "zephyr", "alder", "bramble", "cobalt", "dune", "estuary", "fern", "glacier", "heath",
    "iris", "jade", "kestrel", "lichen", "marble", "nimbus", "ochre", "pebble", "quill", "reef", "saffron",
    "thistle", "upland", "vale",
];
const FILLERS: [&str; 6] = ["", "maybe", "probably", "i think", "surely", "it is"];
const WORDS_PER_ANSWER: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedSpec {
    pub m: usize,
    pub d: usize,
    pub cluster_sizes: Vec<usize>,
    pub within_cosine: f64,
    pub across_cosine: f64,
    pub seed: u64,
}

impl PlantedSpec {
    /// `clusters` clusters of near-equal size, within-cosine 0.98,
    /// across-cosine 0.
    pub fn equal_clusters(m: usize, d: usize, clusters: usize, seed: u64) -> Self {
        let clusters = clusters.max(1);
        let cluster_sizes = (0..clusters)
            .map(|c| m / clusters + usize::from(c < m % clusters))
            .collect();
        Self {
            m,
            d,
            cluster_sizes,
            within_cosine: DEFAULT_WITHIN_COSINE,
            across_cosine: 0.0,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Infeasible(msg));
        if self.m < 2 {
            return bad(format!("m={} but at least 2 responses are needed", self.m));
        }
        if self.cluster_sizes.iter().sum::<usize>() != self.m || self.cluster_sizes.contains(&0) {
            return bad(format!("cluster sizes {:?} do not partition m={}", self.cluster_sizes, self.m));
        }
        for c in [self.within_cosine, self.across_cosine] {
            if !(-1.0..=1.0).contains(&c) {
                return bad(format!("cosine target {c} is outside [-1, 1]"));
            }
        }
        if self.within_cosine <= self.across_cosine {
            return bad("within-cluster cosine must exceed across-cluster cosine".into());
        }
        Ok(())
    }

    fn labels(&self) -> Vec<usize> {
        self.cluster_sizes
            .iter()
            .enumerate()
            .flat_map(|(c, &s)| std::iter::repeat_n(c, s))
            .collect()
    }
}

fn canonical_answer(cluster: usize) -> String {
    let groups = WORDS.len() / WORDS_PER_ANSWER;
    let (group, round) = (cluster % groups, cluster / groups);
    WORDS[group * WORDS_PER_ANSWER..(group + 1) * WORDS_PER_ANSWER]
        .iter()
        .map(|w| if round == 0 { (*w).to_owned() } else { format!("{w}{round}") })
        .collect::<Vec<_>>()
        .join(" ")
}

/// Orthonormal `d × r` columns by Gram-Schmidt on Gaussian draws.
fn random_orthonormal(d: usize, r: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let mut q = Array2::<f64>::zeros((d, r));
    let mut c = 0;
    while c < r {
        let mut v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        for p in 0..c {
            let dot: f64 = (0..d).map(|i| v[i] * q[[i, p]]).sum();
            for (i, x) in v.iter_mut().enumerate() {
                *x -= dot * q[[i, p]];
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-6 {
            for (i, x) in v.iter().enumerate() {
                q[[i, c]] = x / norm;
            }
            c += 1;
        }
    }
    q
}

fn planted_embeddings(spec: &PlantedSpec, labels: &[usize], rng: &mut ChaCha8Rng) -> Result<Array2<f64>> {
    let m = spec.m;
    let target = Array2::from_shape_fn((m, m), |(i, j)| {
        if i == j {
            1.0
        } else if labels[i] == labels[j] {
            spec.within_cosine
        } else {
            spec.across_cosine
        }
    });
    let eig = symmetric_eigen(&target, JacobiOptions::default())?;
    if eig.values[0] < -RANK_EPS {
        return Err(Error::Infeasible(format!(
            "target cosine matrix is not positive semidefinite (min eigenvalue {:.3e})",
            eig.values[0]
        )));
    }
    let kept: Vec<usize> = (0..m).filter(|&k| eig.values[k] > RANK_EPS).collect();
    if kept.len() > spec.d {
        return Err(Error::Infeasible(format!(
            "targets need rank {} but d={}",
            kept.len(),
            spec.d
        )));
    }
    let factor = Array2::from_shape_fn((m, kept.len()), |(i, c)| {
        eig.vectors[[i, kept[c]]] * eig.values[kept[c]].sqrt()
    });
    let rotation = random_orthonormal(spec.d, kept.len(), rng);
    let mut e = factor.dot(&rotation.t());
    let scale = NOISE / (spec.d as f64).sqrt();
    for mut row in e.rows_mut() {
        for x in row.iter_mut() {
            *x += scale * rng.sample::<f64, _>(StandardNormal);
        }
        let norm = row.dot(&row).sqrt();
        row.mapv_inplace(|x| x / norm);
    }
    let cos = e.dot(&e.t());
    let worst = cos
        .indexed_iter()
        .map(|(ix, c)| (c - target[ix]).abs())
        .fold(0.0, f64::max);
    if worst > COSINE_TOLERANCE {
        return Err(Error::Infeasible(format!(
            "generated cosines miss their targets by {worst:.3}"
        )));
    }
    Ok(e)
}

fn logit_triple(entail: bool, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let jitter = |rng: &mut ChaCha8Rng| rng.random_range(-0.5..0.5);
    if entail {
        vec![4.0 + jitter(rng), jitter(rng), -2.0 + jitter(rng)]
    } else {
        vec![-2.0 + jitter(rng), jitter(rng), 4.0 + jitter(rng)]
    }
}

/// One bundle with the planted structure, responses shuffled by the seed.
pub fn generate_planted(spec: &PlantedSpec) -> Result<ResponseBundle> {
    spec.validate()?;
    let m = spec.m;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut perm: Vec<usize> = (0..m).collect();
    perm.shuffle(&mut rng);
    let sorted_labels = spec.labels();
    let labels: Vec<usize> = perm.iter().map(|&p| sorted_labels[p]).collect();

    let e = planted_embeddings(spec, &labels, &mut rng)?;

    let responses: Vec<String> = labels
        .iter()
        .map(|&c| {
            let filler = FILLERS[rng.random_range(0..FILLERS.len())];
            let answer = canonical_answer(c);
            if filler.is_empty() {
                answer
            } else {
                format!("{filler} {answer}")
            }
        })
        .collect();

    let mut forward = vec![vec![Vec::new(); m]; m];
    for (i, row) in forward.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            *cell = logit_triple(labels[i] == labels[j], &mut rng);
        }
    }
    let nli: Vec<Vec<Vec<Vec<f64>>>> = (0..m)
        .map(|i| {
            (0..m)
                .map(|j| vec![forward[i][j].clone(), forward[j][i].clone()])
                .collect()
        })
        .collect();

    let token_counts: Vec<u64> = responses.iter().map(|r| tokenize(r).len() as u64).collect();
    let logprobs: Vec<f64> = labels
        .iter()
        .zip(&token_counts)
        .map(|(&c, &n)| {
            let per_token = if c == 0 {
                rng.random_range(0.1..0.5)
            } else {
                rng.random_range(0.5..1.5)
            };
            -(n as f64) * per_token
        })
        .collect();
    let gpt: Vec<f64> = labels
        .iter()
        .map(|&c| {
            if c == 0 {
                rng.random_range(0.75..1.0)
            } else {
                rng.random_range(0.0..0.5)
            }
        })
        .collect();

    let clusters = spec.cluster_sizes.len();
    let mut bundle = ResponseBundle::new(
        format!("planted-s{}-c{clusters}", spec.seed),
        format!("synthetic question with {clusters} planted answer clusters"),
        vec![canonical_answer(0)],
        responses,
    );
    bundle.embeddings = Some(e.rows().into_iter().map(|r| r.to_vec()).collect());
    bundle.nli_logits = Some(nli);
    bundle.seq_logprobs = Some(SeqLogProbs { logprobs, token_counts });
    bundle.external_scores = Some(BTreeMap::from([(GPT_SCORE_KEY.to_owned(), gpt)]));
    Ok(bundle)
}

/// A dataset of planted bundles whose cluster counts cycle through
/// `1..=max_clusters`.
#[derive(Debug, Clone, PartialEq)]
pub struct FixtureSpec {
    pub questions: usize,
    pub m: usize,
    pub d: usize,
    pub max_clusters: usize,
    pub within_cosine: f64,
    pub across_cosine: f64,
    pub seed: u64,
}

impl Default for FixtureSpec {
    fn default() -> Self {
        Self {
            questions: 40,
            m: 12,
            d: 128,
            max_clusters: 4,
            within_cosine: DEFAULT_WITHIN_COSINE,
            across_cosine: 0.0,
            seed: 7,
        }
    }
}

/// Question `q` (0-based) gets `1 + q % max_clusters` clusters and id
/// `q{q:04}-c{clusters}`.
pub fn generate_dataset(spec: &FixtureSpec) -> Result<Dataset> {
    if spec.questions == 0 {
        return Err(Error::EmptyDataset);
    }
    if spec.max_clusters == 0 || spec.max_clusters > spec.m {
        return Err(Error::Infeasible(format!(
            "max_clusters={} must be between 1 and m={}",
            spec.max_clusters, spec.m
        )));
    }
    let mut seeds = ChaCha8Rng::seed_from_u64(spec.seed);
    let bundles = (0..spec.questions)
        .map(|q| {
            let clusters = 1 + q % spec.max_clusters;
            let mut planted = PlantedSpec::equal_clusters(spec.m, spec.d, clusters, seeds.random());
            planted.within_cosine = spec.within_cosine;
            planted.across_cosine = spec.across_cosine;
            let mut b = generate_planted(&planted)?;
            b.question_id = format!("q{q:04}-c{clusters}");
            Ok(b)
        })
        .collect::<Result<Vec<_>>>()?;
    let metadata = DatasetMetadata {
        encoder_id: Some("synthetic-planted".into()),
        nli_model_id: Some("synthetic-planted".into()),
        ..DatasetMetadata::default()
    };
    Dataset::new(metadata, bundles)
}
