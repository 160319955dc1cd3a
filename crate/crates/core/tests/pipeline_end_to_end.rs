use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spectral_uq::eval::{auarc, evaluate, oracle_curve, LabelRow, ScoreRow, TableRow, UncertaintyTable};
use spectral_uq::exec::Execution;
use spectral_uq::fixtures::{generate_dataset, FixtureSpec};
use spectral_uq::pipeline::{label_dataset, score_dataset, Judge, Method, PcaScope, ScoreConfig};
use spectral_uq::text::Criterion;

fn all_methods() -> Vec<Method> {
    let mut m = Method::BUILTIN.to_vec();
    m.push(Method::External("gpt_correctness".into()));
    m
}

#[test]
fn sequential_and_parallel_agree_bitwise() {
    let ds = generate_dataset(&FixtureSpec::default()).unwrap();
    let methods = all_methods();
    let run = |execution| {
        let cfg = ScoreConfig {
            execution,
            ..ScoreConfig::default()
        };
        score_dataset(&ds, &methods, &cfg, None).unwrap()
    };
    let seq = run(Execution::Sequential);
    let par = run(Execution::Parallel);
    assert_eq!(seq.len(), ds.len() * methods.len());
    let bits = |rows: &[ScoreRow]| rows.iter().map(|r| r.uncertainty.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&seq), bits(&par));
}

#[test]
fn fixture_scores_evaluate_end_to_end() {
    let ds = generate_dataset(&FixtureSpec::default()).unwrap();
    let scores = score_dataset(&ds, &all_methods(), &ScoreConfig::default(), None).unwrap();
    let labels = label_dataset(&ds, Criterion::RougeL, 0.3, Judge::First, Execution::default()).unwrap();
    let label_rows: Vec<LabelRow> = labels.iter().map(LabelRow::from).collect();
    let table = UncertaintyTable::join(&scores, &label_rows).unwrap();
    let report = evaluate(&table).unwrap();
    assert_eq!(report.metrics.len(), all_methods().len());
    for m in &report.metrics {
        assert!(m.auarc <= report.oracle_auarc + 1e-12, "{}", m.method);
        assert_eq!(m.n, ds.len());
    }
}

#[test]
fn per_question_pca_scope() {
    let ds = generate_dataset(&FixtureSpec {
        questions: 8,
        ..FixtureSpec::default()
    })
    .unwrap();
    let cfg = ScoreConfig {
        pca_scope: PcaScope::PerQuestion,
        ..ScoreConfig::default()
    };
    let rows = score_dataset(&ds, &[Method::CssEig], &cfg, None).unwrap();
    for r in rows {
        let c: f64 = r.question_id.rsplit('c').next().unwrap().parse().unwrap();
        assert!((r.uncertainty - c).abs() < 0.25, "{}: {}", r.question_id, r.uncertainty);
    }
}

fn table(data: &[(f64, bool)]) -> UncertaintyTable {
    UncertaintyTable::new(
        data.iter()
            .enumerate()
            .map(|(i, &(u, c))| TableRow {
                question_id: format!("q{i:05}"),
                method: "m".into(),
                uncertainty: u,
                correct: c,
            })
            .collect(),
    )
    .unwrap()
}

#[test]
fn perfect_ranking_reaches_the_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let data: Vec<(f64, bool)> = (0..300)
        .map(|_| {
            let c = rng.random_bool(0.6);
            (if c { rng.random_range(0.0..0.5) } else { rng.random_range(0.5..1.0) }, c)
        })
        .collect();
    let report = evaluate(&table(&data)).unwrap();
    assert_eq!(report.metrics[0].auarc, report.oracle_auarc);
}

#[test]
fn random_scores_track_base_accuracy() {
    let mut rng = ChaCha8Rng::seed_from_u64(2025);
    let data: Vec<(f64, bool)> = (0..1000).map(|i| (rng.random::<f64>(), i < 600)).collect();
    let report = evaluate(&table(&data)).unwrap();
    assert!((report.metrics[0].base_accuracy - 0.6).abs() < 1e-12);
    assert!((report.metrics[0].auarc - 0.6).abs() < 0.02, "{}", report.metrics[0].auarc);
    let labels: Vec<bool> = data.iter().map(|d| d.1).collect();
    assert_eq!(auarc(&oracle_curve(&labels).unwrap()), report.oracle_auarc);
}
