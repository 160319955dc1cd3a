//! Dataset-level scoring: every requested uncertainty method on every bundle.

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;

use crate::affinity::AffinityMatrix;
use crate::css::{hadamard_features, normalize_embeddings, project_affinity, PairGram, PcaModel, ProjectionStrategy};
use crate::data::{Dataset, ResponseBundle};
use crate::error::{Error, Result};
use crate::eval::ScoreRow;
use crate::exec::{map_ordered, try_map_ordered, Execution};
use crate::nli::{
    bidirectional_clusters, nli_affinity, nli_pair_scores, num_sem_uncertainty, semantic_entropy, Clustering,
    NliLogits, NliSimilarity,
};
use crate::spectral::{spectral_scores, LaplacianKind, SpectralResult};
use crate::text::{label_correct, lexi_sim_uncertainty, CorrectnessLabel, Criterion};

/// Default PCA width for pair features.
pub const DEFAULT_PCA_DIM: usize = 64;

/// Bundles per partial Gram matrix when fitting the global PCA. Fixed so the
/// summation order, and therefore the fitted basis, does not depend on the
/// number of threads.
const GRAM_CHUNK: usize = 32;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Method {
    CssEig,
    CssDeg,
    CssEcc,
    LglEig,
    LglDeg,
    LglEcc,
    NumSem,
    LexiSim,
    Se,
    /// `1 − external_scores[name]` of the judged response.
    External(String),
}

impl Method {
    pub const BUILTIN: [Method; 9] = [
        Method::CssEig,
        Method::CssDeg,
        Method::CssEcc,
        Method::LglEig,
        Method::LglDeg,
        Method::LglEcc,
        Method::NumSem,
        Method::LexiSim,
        Method::Se,
    ];

    fn needs_css(&self) -> bool {
        matches!(self, Method::CssEig | Method::CssDeg | Method::CssEcc)
    }

    fn needs_nli_graph(&self) -> bool {
        matches!(self, Method::LglEig | Method::LglDeg | Method::LglEcc)
    }

    fn needs_clusters(&self) -> bool {
        matches!(self, Method::NumSem | Method::Se)
    }

    /// First missing prerequisite of `bundle`, if any.
    fn missing(&self, bundle: &ResponseBundle) -> Option<&'static str> {
        if self.needs_css() && bundle.embeddings.is_none() {
            return Some("embeddings");
        }
        if (self.needs_nli_graph() || self.needs_clusters()) && bundle.nli_logits.is_none() {
            return Some("nli_logits");
        }
        match self {
            Method::Se if bundle.seq_logprobs.is_none() => Some("seq_logprobs"),
            Method::External(name) if bundle.external_score(name).is_none() => Some("the named external score"),
            _ => None,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::CssEig => f.write_str("css-eig"),
            Method::CssDeg => f.write_str("css-deg"),
            Method::CssEcc => f.write_str("css-ecc"),
            Method::LglEig => f.write_str("lgl-eig"),
            Method::LglDeg => f.write_str("lgl-deg"),
            Method::LglEcc => f.write_str("lgl-ecc"),
            Method::NumSem => f.write_str("numsem"),
            Method::LexiSim => f.write_str("lexisim"),
            Method::Se => f.write_str("se"),
            Method::External(name) => write!(f, "external:{name}"),
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if let Some(name) = s.strip_prefix("external:") {
            if name.is_empty() {
                return Err(Error::Unknown {
                    kind: "method",
                    value: s.to_owned(),
                });
            }
            return Ok(Method::External(name.to_owned()));
        }
        Method::BUILTIN
            .iter()
            .find(|m| m.to_string() == s)
            .cloned()
            .ok_or_else(|| Error::Unknown {
                kind: "method",
                value: s.to_owned(),
            })
    }
}

/// Which of the `m` responses is checked for correctness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Judge {
    #[default]
    First,
    /// Highest sequence log-probability; the first response when the bundle
    /// has no log-probabilities.
    MostProbable,
}

impl Judge {
    pub fn index(self, bundle: &ResponseBundle) -> usize {
        match (self, &bundle.seq_logprobs) {
            (Judge::MostProbable, Some(lp)) => lp
                .logprobs
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best })
                .0,
            _ => 0,
        }
    }
}

impl fmt::Display for Judge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Judge::First => "first",
            Judge::MostProbable => "most-probable",
        })
    }
}

impl FromStr for Judge {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "first" => Ok(Self::First),
            "most-probable" => Ok(Self::MostProbable),
            _ => Err(Error::Unknown {
                kind: "judge",
                value: s.to_owned(),
            }),
        }
    }
}

/// Population the PCA basis is fitted on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PcaScope {
    /// Pair features of every bundle pooled, fitted once.
    #[default]
    Global,
    /// A separate basis per bundle.
    PerQuestion,
}

impl fmt::Display for PcaScope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PcaScope::Global => "global",
            PcaScope::PerQuestion => "per-question",
        })
    }
}

impl FromStr for PcaScope {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "global" => Ok(Self::Global),
            "per-question" => Ok(Self::PerQuestion),
            _ => Err(Error::Unknown {
                kind: "pca scope",
                value: s.to_owned(),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreConfig {
    pub pca_dim: usize,
    pub pca_scope: PcaScope,
    pub projection: ProjectionStrategy,
    pub laplacian: LaplacianKind,
    pub nli_similarity: NliSimilarity,
    pub length_normalize: bool,
    pub judge: Judge,
    pub execution: Execution,
}

impl Default for ScoreConfig {
    fn default() -> Self {
        Self {
            pca_dim: DEFAULT_PCA_DIM,
            pca_scope: PcaScope::default(),
            projection: ProjectionStrategy::default(),
            laplacian: LaplacianKind::default(),
            nli_similarity: NliSimilarity::default(),
            length_normalize: false,
            judge: Judge::default(),
            execution: Execution::default(),
        }
    }
}

/// Fails on the first bundle, in file order, that lacks data for a method.
pub fn check_prerequisites(dataset: &Dataset, methods: &[Method]) -> Result<()> {
    if methods.is_empty() {
        return Err(Error::Config("no methods requested".into()));
    }
    for method in methods {
        if let Some(b) = dataset.bundles().iter().find(|b| method.missing(b).is_some()) {
            return Err(Error::MissingPrerequisite {
                method: method.to_string(),
                question_id: b.question_id.clone(),
                requirement: method.missing(b).expect("checked"),
            });
        }
    }
    Ok(())
}

fn unit_embeddings(bundle: &ResponseBundle) -> Result<Array2<f64>> {
    let e = bundle.embedding_matrix().ok_or_else(|| Error::MissingPrerequisite {
        method: "css".into(),
        question_id: bundle.question_id.clone(),
        requirement: "embeddings",
    })?;
    normalize_embeddings(e.view()).map_err(|err| match err {
        Error::ZeroNormRow(row) => Error::Config(format!(
            "bundle `{}`: embedding row {row} has zero norm",
            bundle.question_id
        )),
        other => other,
    })
}

fn check_pca_dim(k: usize, d: usize) -> Result<()> {
    if k == 0 || k > d {
        return Err(Error::Pca(format!(
            "pca_dim={k} must be between 1 and the embedding width d={d}"
        )));
    }
    Ok(())
}

/// Fits one basis on the pair features of every bundle with embeddings.
pub fn fit_global_pca(dataset: &Dataset, k: usize, exec: Execution) -> Result<PcaModel> {
    let d = dataset
        .embedding_dim()
        .ok_or_else(|| Error::Pca("no bundle carries embeddings".into()))?;
    check_pca_dim(k, d)?;
    let with_embeddings: Vec<&ResponseBundle> =
        dataset.bundles().iter().filter(|b| b.embeddings.is_some()).collect();
    let chunks: Vec<&[&ResponseBundle]> = with_embeddings.chunks(GRAM_CHUNK).collect();
    let partials = try_map_ordered(exec, &chunks, |chunk| {
        let mut acc = PairGram::zeros(d);
        for b in chunk.iter() {
            acc.merge(&PairGram::from_embeddings(unit_embeddings(b)?.view()))?;
        }
        Ok(acc)
    })?;
    let mut total = PairGram::zeros(d);
    for p in &partials {
        total.merge(p)?;
    }
    total.fit(k)
}

fn with_bundle_context(err: Error, question_id: &str) -> Error {
    match err {
        Error::NoConvergence { sweeps, context: None } => Error::NoConvergence {
            sweeps,
            context: Some(format!("bundle `{question_id}`")),
        },
        other => other,
    }
}

/// CSS affinity for one bundle. `model` is the global basis; without one a
/// basis is fitted on this bundle's own pair features.
pub fn css_affinity(
    bundle: &ResponseBundle,
    model: Option<&PcaModel>,
    config: &ScoreConfig,
) -> Result<AffinityMatrix> {
    let e = unit_embeddings(bundle)?;
    let pairs = hadamard_features(e.view())?;
    match model {
        Some(model) => project_affinity(&pairs, model, config.projection),
        None => {
            check_pca_dim(config.pca_dim, e.ncols())?;
            let local = PairGram::from_embeddings(e.view()).fit(config.pca_dim)?;
            project_affinity(&pairs, &local, config.projection)
        }
    }
    .map_err(|err| with_bundle_context(err, &bundle.question_id))
}

fn nli_logits(bundle: &ResponseBundle) -> Result<NliLogits> {
    let nested = bundle.nli_logits.as_ref().ok_or_else(|| Error::MissingPrerequisite {
        method: "nli".into(),
        question_id: bundle.question_id.clone(),
        requirement: "nli_logits",
    })?;
    NliLogits::from_nested(nested)
}

/// Scores of every method for one bundle, in `methods` order.
pub fn score_bundle(
    bundle: &ResponseBundle,
    methods: &[Method],
    config: &ScoreConfig,
    model: Option<&PcaModel>,
) -> Result<Vec<f64>> {
    let qid = bundle.question_id.as_str();
    let css: Option<SpectralResult> = if methods.iter().any(Method::needs_css) {
        let w = css_affinity(bundle, model, config)?;
        Some(spectral_scores(&w, config.laplacian).map_err(|e| with_bundle_context(e, qid))?)
    } else {
        None
    };
    let needs_logits = methods.iter().any(|m| m.needs_nli_graph() || m.needs_clusters());
    let logits = if needs_logits { Some(nli_logits(bundle)?) } else { None };
    let lgl: Option<SpectralResult> = match &logits {
        Some(l) if methods.iter().any(Method::needs_nli_graph) => {
            let w = nli_affinity(&nli_pair_scores(l, config.nli_similarity));
            Some(spectral_scores(&w, config.laplacian).map_err(|e| with_bundle_context(e, qid))?)
        }
        _ => None,
    };
    let clusters: Option<Clustering> = match &logits {
        Some(l) if methods.iter().any(Method::needs_clusters) => Some(bidirectional_clusters(l)),
        _ => None,
    };
    let judged = config.judge.index(bundle);
    methods
        .iter()
        .map(|method| {
            let v = match method {
                Method::CssEig => css.as_ref().expect("computed").u_eig,
                Method::CssDeg => css.as_ref().expect("computed").u_deg,
                Method::CssEcc => css.as_ref().expect("computed").u_ecc,
                Method::LglEig => lgl.as_ref().expect("computed").u_eig,
                Method::LglDeg => lgl.as_ref().expect("computed").u_deg,
                Method::LglEcc => lgl.as_ref().expect("computed").u_ecc,
                Method::NumSem => num_sem_uncertainty(clusters.as_ref().expect("computed")),
                Method::LexiSim => lexi_sim_uncertainty(&bundle.responses)?,
                Method::Se => {
                    let lp = bundle.seq_logprobs.as_ref().ok_or_else(|| Error::MissingPrerequisite {
                        method: method.to_string(),
                        question_id: qid.to_owned(),
                        requirement: "seq_logprobs",
                    })?;
                    semantic_entropy(
                        clusters.as_ref().expect("computed"),
                        &lp.logprobs,
                        &lp.token_counts,
                        config.length_normalize,
                    )?
                }
                Method::External(name) => {
                    let s = bundle.external_score(name).ok_or_else(|| Error::MissingPrerequisite {
                        method: method.to_string(),
                        question_id: qid.to_owned(),
                        requirement: "the named external score",
                    })?;
                    1.0 - s[judged]
                }
            };
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("{method} score for bundle `{qid}`")));
            }
            Ok(v)
        })
        .collect()
}

/// Scores every bundle with every method. Rows are bundle-major in file
/// order, methods in request order, regardless of execution mode.
pub fn score_dataset(
    dataset: &Dataset,
    methods: &[Method],
    config: &ScoreConfig,
    model: Option<&PcaModel>,
) -> Result<Vec<ScoreRow>> {
    check_prerequisites(dataset, methods)?;
    if config.pca_dim == 0 {
        return Err(Error::Config("pca_dim must be at least 1".into()));
    }
    let fitted;
    let model = match (config.pca_scope, model) {
        (_, Some(m)) => Some(m),
        (PcaScope::Global, None) if methods.iter().any(Method::needs_css) => {
            fitted = fit_global_pca(dataset, config.pca_dim, config.execution)?;
            Some(&fitted)
        }
        _ => None,
    };
    let per_bundle = try_map_ordered(config.execution, dataset.bundles(), |b| {
        score_bundle(b, methods, config, model)
    })?;
    let mut rows = Vec::with_capacity(per_bundle.len() * methods.len());
    for (bundle, scores) in dataset.bundles().iter().zip(per_bundle) {
        for (method, uncertainty) in methods.iter().zip(scores) {
            rows.push(ScoreRow {
                question_id: bundle.question_id.clone(),
                method: method.to_string(),
                uncertainty,
            });
        }
    }
    Ok(rows)
}

/// Correctness of the judged response of every bundle.
pub fn label_dataset(
    dataset: &Dataset,
    criterion: Criterion,
    threshold: f64,
    judge: Judge,
    exec: Execution,
) -> Result<Vec<CorrectnessLabel>> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::Config(format!("threshold {threshold} is outside [0, 1]")));
    }
    let labels = map_ordered(exec, dataset.bundles(), |b| {
        label_correct(b, judge.index(b), criterion, threshold)
    });
    labels.into_iter().collect()
}
