//! CSV files exchanged between the `score`, `label` and `eval` steps.
//!
//! Writers render to a `String` so that callers can produce every output
//! before touching the filesystem.

use std::path::Path;

use crate::error::{Error, Result};
use crate::eval::{CurvePoints, LabelRow, MethodMetrics, ScoreRow};
use crate::text::CorrectnessLabel;

pub const SCORES_HEADER: [&str; 3] = ["question_id", "method", "uncertainty"];
pub const LABELS_HEADER: [&str; 5] = ["question_id", "response_index", "criterion", "score", "correct"];
pub const METRICS_HEADER: [&str; 5] = ["method", "auarc", "auroc", "n", "base_accuracy"];
pub const CURVE_HEADER: [&str; 2] = ["rejection_fraction", "accuracy"];

fn render<const N: usize>(header: [&str; N], rows: impl Iterator<Item = [String; N]>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}

/// Uncertainties use the shortest representation that reads back exactly.
pub fn scores_csv(rows: &[ScoreRow]) -> String {
    render(
        SCORES_HEADER,
        rows.iter()
            .map(|r| [r.question_id.clone(), r.method.clone(), r.uncertainty.to_string()]),
    )
}

pub fn labels_csv(labels: &[CorrectnessLabel]) -> String {
    render(
        LABELS_HEADER,
        labels.iter().map(|l| {
            [
                l.question_id.clone(),
                l.response_index.to_string(),
                l.criterion.to_string(),
                l.score.to_string(),
                l.correct.to_string(),
            ]
        }),
    )
}

pub fn metrics_csv(metrics: &[MethodMetrics]) -> String {
    render(
        METRICS_HEADER,
        metrics.iter().map(|m| {
            [
                m.method.clone(),
                format!("{:.6}", m.auarc),
                m.auroc.to_string(),
                m.n.to_string(),
                format!("{:.6}", m.base_accuracy),
            ]
        }),
    )
}

pub fn curve_csv(curve: &CurvePoints) -> String {
    render(
        CURVE_HEADER,
        curve.points().iter().map(|(f, a)| [format!("{f:.6}"), format!("{a:.6}")]),
    )
}

fn read_records<const N: usize>(path: &Path, header: [&str; N]) -> Result<Vec<(usize, csv::StringRecord)>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_owned(),
        line,
        message,
    };
    let mut reader = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let found = reader.headers().map_err(|e| parse_err(1, e.to_string()))?;
    if found.iter().ne(header.iter().copied()) {
        return Err(parse_err(1, format!("expected header `{}`", header.join(","))));
    }
    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_err(line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        out.push((line, rec));
    }
    Ok(out)
}

fn field<T: std::str::FromStr>(path: &Path, line: usize, rec: &csv::StringRecord, i: usize, name: &str) -> Result<T> {
    rec[i].parse().map_err(|_| Error::Parse {
        path: path.to_owned(),
        line,
        message: format!("cannot parse {name} `{}`", &rec[i]),
    })
}

pub fn read_scores_csv(path: impl AsRef<Path>) -> Result<Vec<ScoreRow>> {
    let path = path.as_ref();
    read_records(path, SCORES_HEADER)?
        .into_iter()
        .map(|(line, rec)| {
            Ok(ScoreRow {
                question_id: rec[0].to_owned(),
                method: rec[1].to_owned(),
                uncertainty: field(path, line, &rec, 2, "uncertainty")?,
            })
        })
        .collect()
}

pub fn read_labels_csv(path: impl AsRef<Path>) -> Result<Vec<LabelRow>> {
    let path = path.as_ref();
    read_records(path, LABELS_HEADER)?
        .into_iter()
        .map(|(line, rec)| {
            Ok(LabelRow {
                question_id: rec[0].to_owned(),
                response_index: field(path, line, &rec, 1, "response_index")?,
                criterion: field(path, line, &rec, 2, "criterion")?,
                score: field(path, line, &rec, 3, "score")?,
                correct: field(path, line, &rec, 4, "correct")?,
            })
        })
        .collect()
}
