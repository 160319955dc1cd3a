mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use spectral_uq::css::{read_pca_model, write_pca_model, ProjectionStrategy};
use spectral_uq::data::{load_bundles, write_bundles, EmbeddingStorage};
use spectral_uq::eval::{evaluate, UncertaintyTable};
use spectral_uq::exec::{with_threads, Execution};
use spectral_uq::fixtures::{generate_dataset, FixtureSpec};
use spectral_uq::nli::NliSimilarity;
use spectral_uq::pipeline::{fit_global_pca, label_dataset, score_dataset, Judge, Method, PcaScope, ScoreConfig};
use spectral_uq::report;
use spectral_uq::spectral::LaplacianKind;
use spectral_uq::text::Criterion;

use config::{resolve, FileConfig};

const DEFAULT_METHODS: [&str; 3] = ["css-eig", "css-deg", "css-ecc"];

#[derive(Parser)]
#[command(name = "spectral-uq", version, about = "Spectral uncertainty scores for sampled LLM responses")]
struct Cli {
    /// TOML file with defaults for any flag.
    #[arg(long, global = true, env = "SPECTRAL_UQ_CONFIG")]
    config: Option<PathBuf>,

    /// Worker threads (default: one per core).
    #[arg(long, global = true, env = "SPECTRAL_UQ_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic dataset with planted answer clusters.
    Fixtures(FixturesArgs),
    /// Compute uncertainty scores for every bundle.
    Score(ScoreArgs),
    /// Judge the correctness of one response per bundle.
    Label(LabelArgs),
    /// Join scores with labels and report AUARC, AUROC and rejection curves.
    Eval(EvalArgs),
}

#[derive(Args)]
struct FixturesArgs {
    /// Output bundle file (.jsonl).
    #[arg(long)]
    out: PathBuf,
    #[arg(long, env = "SPECTRAL_UQ_QUESTIONS")]
    questions: Option<usize>,
    /// Responses per question.
    #[arg(long, env = "SPECTRAL_UQ_M")]
    m: Option<usize>,
    /// Embedding width.
    #[arg(long, env = "SPECTRAL_UQ_D")]
    d: Option<usize>,
    /// Question q gets 1 + q % max_clusters clusters.
    #[arg(long, env = "SPECTRAL_UQ_MAX_CLUSTERS")]
    max_clusters: Option<usize>,
    #[arg(long, env = "SPECTRAL_UQ_WITHIN_COSINE")]
    within_cosine: Option<f64>,
    #[arg(long, env = "SPECTRAL_UQ_ACROSS_COSINE")]
    across_cosine: Option<f64>,
    #[arg(long, env = "SPECTRAL_UQ_SEED")]
    seed: Option<u64>,
    /// Store embeddings in a binary .embed file next to the output.
    #[arg(long)]
    sidecar: bool,
}

#[derive(Args)]
struct ScoreArgs {
    /// Bundle file (.jsonl).
    #[arg(long)]
    input: PathBuf,
    /// Scores CSV to write.
    #[arg(long)]
    out: PathBuf,
    /// Comma-separated: css-eig, css-deg, css-ecc, lgl-eig, lgl-deg, lgl-ecc,
    /// numsem, lexisim, se, external:<name>.
    #[arg(long, env = "SPECTRAL_UQ_METHODS", value_delimiter = ',')]
    methods: Option<Vec<Method>>,
    /// PCA width for pair features.
    #[arg(long, env = "SPECTRAL_UQ_PCA_DIM")]
    pca_dim: Option<usize>,
    /// global | per-question
    #[arg(long, env = "SPECTRAL_UQ_PCA_SCOPE")]
    pca_scope: Option<PcaScope>,
    /// unit-sum | prototype-cosine
    #[arg(long, env = "SPECTRAL_UQ_PROJECTION")]
    projection: Option<ProjectionStrategy>,
    /// normalized | unnormalized
    #[arg(long, env = "SPECTRAL_UQ_LAPLACIAN")]
    laplacian: Option<LaplacianKind>,
    /// entail-neutral-half | entailment | not-contradiction
    #[arg(long, env = "SPECTRAL_UQ_NLI_SIMILARITY")]
    nli_similarity: Option<NliSimilarity>,
    /// Divide sequence log-probabilities by token count in semantic entropy.
    #[arg(long, env = "SPECTRAL_UQ_LENGTH_NORMALIZE", num_args = 0..=1, default_missing_value = "true")]
    length_normalize: Option<bool>,
    /// first | most-probable (response used by external:<name>).
    #[arg(long, env = "SPECTRAL_UQ_JUDGE")]
    judge: Option<Judge>,
    /// parallel | sequential
    #[arg(long, env = "SPECTRAL_UQ_EXECUTION")]
    execution: Option<Execution>,
    /// Reuse a saved PCA model instead of fitting one.
    #[arg(long, conflicts_with = "save_pca")]
    load_pca: Option<PathBuf>,
    /// Save the fitted global PCA model.
    #[arg(long)]
    save_pca: Option<PathBuf>,
}

#[derive(Args)]
struct LabelArgs {
    #[arg(long)]
    input: PathBuf,
    /// Labels CSV to write.
    #[arg(long)]
    out: PathBuf,
    /// rouge_l | gpt_score
    #[arg(long, env = "SPECTRAL_UQ_CRITERION")]
    criterion: Option<Criterion>,
    /// Correct iff score > threshold (default 0.3 for rouge_l, 0.7 for gpt_score).
    #[arg(long, env = "SPECTRAL_UQ_THRESHOLD")]
    threshold: Option<f64>,
    /// first | most-probable
    #[arg(long, env = "SPECTRAL_UQ_JUDGE")]
    judge: Option<Judge>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    scores: PathBuf,
    #[arg(long)]
    labels: PathBuf,
    /// Directory for metrics.csv, curve_<method>.csv and oracle_curve.csv.
    #[arg(long)]
    out_dir: PathBuf,
}

/// Writes through a temporary sibling so a failed run never leaves a
/// truncated file behind.
fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let tmp = path.with_extension("partial");
    std::fs::write(&tmp, contents).with_context(|| format!("writing {}", tmp.display()))?;
    std::fs::rename(&tmp, path).with_context(|| format!("renaming to {}", path.display()))
}

fn run_fixtures(args: FixturesArgs, file: &FileConfig) -> Result<()> {
    let f = &file.fixtures;
    let d = FixtureSpec::default();
    let spec = FixtureSpec {
        questions: args.questions.or(f.questions).unwrap_or(d.questions),
        m: args.m.or(f.m).unwrap_or(d.m),
        d: args.d.or(f.d).unwrap_or(d.d),
        max_clusters: args.max_clusters.or(f.max_clusters).unwrap_or(d.max_clusters),
        within_cosine: args.within_cosine.or(f.within_cosine).unwrap_or(d.within_cosine),
        across_cosine: args.across_cosine.or(f.across_cosine).unwrap_or(d.across_cosine),
        seed: args.seed.or(f.seed).unwrap_or(d.seed),
    };
    let dataset = generate_dataset(&spec)?;
    let storage = if args.sidecar {
        EmbeddingStorage::Sidecar
    } else {
        EmbeddingStorage::Inline
    };
    write_bundles(&args.out, &dataset, storage)?;
    eprintln!("wrote {} bundles to {}", dataset.len(), args.out.display());
    Ok(())
}

fn run_score(args: ScoreArgs, file: &FileConfig) -> Result<()> {
    let s = &file.score;
    let methods: Vec<Method> = match (args.methods, &s.methods) {
        (Some(m), _) => m,
        (None, Some(names)) => names
            .iter()
            .map(|n| n.parse().with_context(|| "config key `score.methods`"))
            .collect::<Result<_>>()?,
        (None, None) => DEFAULT_METHODS.iter().map(|n| n.parse().expect("builtin")).collect(),
    };
    let cfg = ScoreConfig {
        pca_dim: args.pca_dim.or(s.pca_dim).unwrap_or(ScoreConfig::default().pca_dim),
        pca_scope: resolve(args.pca_scope, s.pca_scope.as_deref(), "score.pca_scope", PcaScope::default())?,
        projection: resolve(args.projection, s.projection.as_deref(), "score.projection", Default::default())?,
        laplacian: resolve(args.laplacian, s.laplacian.as_deref(), "score.laplacian", Default::default())?,
        nli_similarity: resolve(
            args.nli_similarity,
            s.nli_similarity.as_deref(),
            "score.nli_similarity",
            Default::default(),
        )?,
        length_normalize: args.length_normalize.or(s.length_normalize).unwrap_or(false),
        judge: resolve(args.judge, s.judge.as_deref(), "score.judge", Judge::default())?,
        execution: resolve(args.execution, s.execution.as_deref(), "score.execution", Execution::default())?,
    };
    let dataset = load_bundles(&args.input)?;
    let model = match &args.load_pca {
        Some(p) => Some(read_pca_model(p)?),
        None => match (&args.save_pca, cfg.pca_scope) {
            (Some(_), PcaScope::Global) => Some(fit_global_pca(&dataset, cfg.pca_dim, cfg.execution)?),
            (Some(_), PcaScope::PerQuestion) => bail!("--save-pca needs --pca-scope global"),
            (None, _) => None,
        },
    };
    let rows = score_dataset(&dataset, &methods, &cfg, model.as_ref())?;
    write_atomic(&args.out, &report::scores_csv(&rows))?;
    if let (Some(path), Some(model)) = (&args.save_pca, &model) {
        write_pca_model(path, model)?;
    }
    eprintln!(
        "scored {} bundles with {} method(s) into {}",
        dataset.len(),
        methods.len(),
        args.out.display()
    );
    Ok(())
}

fn run_label(args: LabelArgs, file: &FileConfig) -> Result<()> {
    let l = &file.label;
    let criterion = resolve(args.criterion, l.criterion.as_deref(), "label.criterion", Criterion::RougeL)?;
    let threshold = args.threshold.or(l.threshold).unwrap_or(criterion.default_threshold());
    let judge = resolve(args.judge, l.judge.as_deref(), "label.judge", Judge::default())?;
    let dataset = load_bundles(&args.input)?;
    let labels = label_dataset(&dataset, criterion, threshold, judge, Execution::default())?;
    write_atomic(&args.out, &report::labels_csv(&labels))?;
    let correct = labels.iter().filter(|l| l.correct).count();
    eprintln!("{correct}/{} judged responses correct ({criterion} > {threshold})", labels.len());
    Ok(())
}

fn curve_file_name(method: &str) -> String {
    format!("curve_{}.csv", method.replace([':', '/', '\\'], "_"))
}

fn run_eval(args: EvalArgs) -> Result<()> {
    let scores = report::read_scores_csv(&args.scores)?;
    let labels = report::read_labels_csv(&args.labels)?;
    let table = UncertaintyTable::join(&scores, &labels)?;
    let result = evaluate(&table)?;

    let mut outputs = vec![
        ("metrics.csv".to_owned(), report::metrics_csv(&result.metrics)),
        ("oracle_curve.csv".to_owned(), report::curve_csv(&result.oracle)),
    ];
    for (method, curve) in &result.curves {
        outputs.push((curve_file_name(method), report::curve_csv(curve)));
    }
    std::fs::create_dir_all(&args.out_dir).with_context(|| format!("creating {}", args.out_dir.display()))?;
    for (name, text) in &outputs {
        write_atomic(&args.out_dir.join(name), text)?;
    }
    print!("{}", outputs[0].1);
    println!("oracle auarc: {:.6}", result.oracle_auarc);
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let file = config::load(cli.config.as_deref())?;
    let threads = cli.threads.or(file.threads);
    let command = cli.command;
    with_threads(threads, move || match command {
        Command::Fixtures(a) => run_fixtures(a, &file),
        Command::Score(a) => run_score(a, &file),
        Command::Label(a) => run_label(a, &file),
        Command::Eval(a) => run_eval(a),
    })?
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
