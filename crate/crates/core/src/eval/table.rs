use std::collections::{BTreeSet, HashMap, HashSet};

use crate::error::{Error, Result};
use crate::text::{CorrectnessLabel, Criterion};

/// One uncertainty score, before correctness is attached.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRow {
    pub question_id: String,
    pub method: String,
    pub uncertainty: f64,
}

/// The fields of a correctness label that survive a round trip through CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelRow {
    pub question_id: String,
    pub response_index: usize,
    pub criterion: Criterion,
    pub score: f64,
    pub correct: bool,
}

impl From<&CorrectnessLabel> for LabelRow {
    fn from(l: &CorrectnessLabel) -> Self {
        Self {
            question_id: l.question_id.clone(),
            response_index: l.response_index,
            criterion: l.criterion,
            score: l.score,
            correct: l.correct,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub question_id: String,
    pub method: String,
    pub uncertainty: f64,
    pub correct: bool,
}

/// Per-question, per-method uncertainty joined with the judged response's
/// correctness. At most one row per `(question_id, method)`.
#[derive(Debug, Clone, PartialEq)]
pub struct UncertaintyTable {
    rows: Vec<TableRow>,
}

impl UncertaintyTable {
    pub fn new(rows: Vec<TableRow>) -> Result<Self> {
        let mut seen = HashSet::new();
        for r in &rows {
            if !r.uncertainty.is_finite() {
                return Err(Error::Table(format!(
                    "non-finite uncertainty for ({}, {})",
                    r.question_id, r.method
                )));
            }
            if !seen.insert((r.question_id.as_str(), r.method.as_str())) {
                return Err(Error::Table(format!(
                    "duplicate row for ({}, {})",
                    r.question_id, r.method
                )));
            }
        }
        Ok(Self { rows })
    }

    /// Attaches labels to scores. Every scored question needs exactly one
    /// label and every labelled question needs a score from every method;
    /// all unmatched ids are reported together.
    pub fn join(scores: &[ScoreRow], labels: &[LabelRow]) -> Result<Self> {
        let mut by_id: HashMap<&str, bool> = HashMap::with_capacity(labels.len());
        for l in labels {
            if by_id.insert(l.question_id.as_str(), l.correct).is_some() {
                return Err(Error::Table(format!(
                    "more than one label for question `{}`",
                    l.question_id
                )));
            }
        }
        let mut unmatched = BTreeSet::new();
        let mut per_method: Vec<(&str, HashSet<&str>)> = Vec::new();
        let mut rows = Vec::with_capacity(scores.len());
        for s in scores {
            match per_method.iter_mut().find(|(m, _)| *m == s.method) {
                Some((_, ids)) => {
                    ids.insert(&s.question_id);
                }
                None => per_method.push((&s.method, HashSet::from([s.question_id.as_str()]))),
            }
            match by_id.get(s.question_id.as_str()) {
                Some(&correct) => rows.push(TableRow {
                    question_id: s.question_id.clone(),
                    method: s.method.clone(),
                    uncertainty: s.uncertainty,
                    correct,
                }),
                None => {
                    unmatched.insert(s.question_id.clone());
                }
            }
        }
        for l in labels {
            if per_method.iter().any(|(_, ids)| !ids.contains(l.question_id.as_str()))
                || per_method.is_empty()
            {
                unmatched.insert(l.question_id.clone());
            }
        }
        if !unmatched.is_empty() {
            return Err(Error::UnmatchedIds(unmatched.into_iter().collect()));
        }
        Self::new(rows)
    }

    pub fn rows(&self) -> &[TableRow] {
        &self.rows
    }

    /// Method names in order of first appearance.
    pub fn methods(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.method) {
                out.push(r.method.clone());
            }
        }
        out
    }

    pub fn rows_for(&self, method: &str) -> Vec<TableRow> {
        self.rows.iter().filter(|r| r.method == method).cloned().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn score(q: &str, m: &str, u: f64) -> ScoreRow {
        ScoreRow {
            question_id: q.into(),
            method: m.into(),
            uncertainty: u,
        }
    }

    fn label(q: &str, correct: bool) -> LabelRow {
        LabelRow {
            question_id: q.into(),
            response_index: 0,
            criterion: Criterion::RougeL,
            score: if correct { 1.0 } else { 0.0 },
            correct,
        }
    }

    #[test]
    fn join_attaches_labels() {
        let t = UncertaintyTable::join(
            &[score("a", "x", 0.1), score("b", "x", 0.2)],
            &[label("b", false), label("a", true)],
        )
        .unwrap();
        assert_eq!(t.rows().len(), 2);
        assert!(t.rows()[0].correct);
        assert!(!t.rows()[1].correct);
    }

    #[test]
    fn join_lists_every_missing_id() {
        let err = UncertaintyTable::join(
            &[score("a", "x", 0.1), score("b", "x", 0.2), score("c", "y", 0.0)],
            &[label("a", true), label("d", true)],
        )
        .unwrap_err();
        match err {
            Error::UnmatchedIds(ids) => assert_eq!(ids, ["a", "b", "c", "d"]),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn label_file_missing_one_id() {
        let err = UncertaintyTable::join(
            &[score("a", "x", 0.1), score("b", "x", 0.2)],
            &[label("a", true)],
        )
        .unwrap_err();
        assert!(err.to_string().contains('b'));
    }

    #[test]
    fn duplicates_rejected() {
        assert!(UncertaintyTable::join(&[score("a", "x", 0.1)], &[label("a", true), label("a", false)]).is_err());
        assert!(UncertaintyTable::join(&[score("a", "x", 0.1), score("a", "x", 0.3)], &[label("a", true)]).is_err());
        assert!(UncertaintyTable::join(&[score("a", "x", f64::NAN)], &[label("a", true)]).is_err());
    }
}
