//! Optional TOML configuration file. Every key mirrors a command-line flag;
//! flags and `SPECTRAL_UQ_*` variables take precedence over the file.
//!
//! ```toml
//! threads = 4
//!
//! [score]
//! methods = ["css-eig", "css-deg", "numsem"]
//! pca_dim = 64
//!
//! [label]
//! criterion = "rouge_l"
//! threshold = 0.3
//! ```

use std::path::Path;

use anyhow::{Context, Result};
use serde::Deserialize;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub threads: Option<usize>,
    #[serde(default)]
    pub score: ScoreSection,
    #[serde(default)]
    pub label: LabelSection,
    #[serde(default)]
    pub fixtures: FixturesSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoreSection {
    pub methods: Option<Vec<String>>,
    pub pca_dim: Option<usize>,
    pub pca_scope: Option<String>,
    pub projection: Option<String>,
    pub laplacian: Option<String>,
    pub nli_similarity: Option<String>,
    pub length_normalize: Option<bool>,
    pub judge: Option<String>,
    pub execution: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelSection {
    pub criterion: Option<String>,
    pub threshold: Option<f64>,
    pub judge: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixturesSection {
    pub questions: Option<usize>,
    pub m: Option<usize>,
    pub d: Option<usize>,
    pub max_clusters: Option<usize>,
    pub within_cosine: Option<f64>,
    pub across_cosine: Option<f64>,
    pub seed: Option<u64>,
}

pub fn load(path: Option<&Path>) -> Result<FileConfig> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
}

/// Flag or environment value if given, else the file value parsed, else the
/// default.
pub fn resolve<T>(flag: Option<T>, file: Option<&str>, key: &str, default: T) -> Result<T>
where
    T: std::str::FromStr,
    T::Err: std::error::Error + Send + Sync + 'static,
{
    match (flag, file) {
        (Some(v), _) => Ok(v),
        (None, Some(s)) => s.parse().with_context(|| format!("config key `{key}`")),
        (None, None) => Ok(default),
    }
}
