//! Selective-answering evaluation.
//!
//! Questions are ranked by uncertainty and rejected most-uncertain first; the
//! accuracy-rejection curve records the accuracy of what remains after `k`
//! rejections for `k = 0..n-1`. AUARC is the mean of those accuracies
//! (rectangle rule on the uniform grid `k/n`). AUROC is the probability that
//! an incorrect answer carries higher uncertainty than a correct one.

mod table;

use std::cmp::Ordering;
use std::fmt;

use crate::error::{Error, Result};

pub use table::{LabelRow, ScoreRow, TableRow, UncertaintyTable};

/// `(rejection_fraction, accuracy)` pairs, rejection ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoints {
    points: Vec<(f64, f64)>,
}

impl CurvePoints {
    fn from_correct_in_rejection_order(correct: &[bool]) -> Self {
        let n = correct.len();
        let mut remaining = correct.iter().filter(|&&c| c).count();
        let mut points = Vec::with_capacity(n);
        for (k, &c) in correct.iter().enumerate() {
            points.push((k as f64 / n as f64, remaining as f64 / (n - k) as f64));
            if c {
                remaining -= 1;
            }
        }
        Self { points }
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn accuracies(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().map(|p| p.1)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Most-uncertain first; ties by question_id, then input order.
fn rejection_order(rows: &[TableRow]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..rows.len()).collect();
    idx.sort_by(|&a, &b| {
        rows[b]
            .uncertainty
            .total_cmp(&rows[a].uncertainty)
            .then_with(|| rows[a].question_id.cmp(&rows[b].question_id))
    });
    idx
}

/// Accuracy-rejection curve for one method's rows.
pub fn arc_curve(rows: &[TableRow]) -> Result<CurvePoints> {
    if rows.is_empty() {
        return Err(Error::Table("cannot build a rejection curve from zero rows".into()));
    }
    let order: Vec<bool> = rejection_order(rows).into_iter().map(|i| rows[i].correct).collect();
    Ok(CurvePoints::from_correct_in_rejection_order(&order))
}

/// Best achievable curve: every incorrect answer rejected before any correct.
pub fn oracle_curve(labels: &[bool]) -> Result<CurvePoints> {
    if labels.is_empty() {
        return Err(Error::Table("cannot build an oracle curve from zero labels".into()));
    }
    let mut order: Vec<bool> = labels.to_vec();
    order.sort();
    Ok(CurvePoints::from_correct_in_rejection_order(&order))
}

pub fn auarc(curve: &CurvePoints) -> f64 {
    curve.accuracies().sum::<f64>() / curve.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Auroc {
    Defined(f64),
    /// All rows share one label.
    Undefined,
}

impl Auroc {
    pub fn value(self) -> Option<f64> {
        match self {
            Auroc::Defined(v) => Some(v),
            Auroc::Undefined => None,
        }
    }
}

impl fmt::Display for Auroc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Auroc::Defined(v) => write!(f, "{v:.6}"),
            Auroc::Undefined => f.write_str("undefined"),
        }
    }
}

/// Mann-Whitney AUROC with incorrect rows as the positive class; ties count
/// one half. Computed from rank groups in `O(n log n)`.
pub fn auroc(rows: &[TableRow]) -> Auroc {
    let mut sorted: Vec<(f64, bool)> = rows.iter().map(|r| (r.uncertainty, r.correct)).collect();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n_correct = sorted.iter().filter(|r| r.1).count() as u128;
    let n_incorrect = sorted.len() as u128 - n_correct;
    if n_correct == 0 || n_incorrect == 0 {
        return Auroc::Undefined;
    }
    // doubled Mann-Whitney U: 2·wins + ties
    let mut doubled: u128 = 0;
    let mut correct_below: u128 = 0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j < sorted.len() && sorted[j].0.total_cmp(&sorted[i].0) == Ordering::Equal {
            j += 1;
        }
        let group_correct = sorted[i..j].iter().filter(|r| r.1).count() as u128;
        let group_incorrect = (j - i) as u128 - group_correct;
        doubled += 2 * group_incorrect * correct_below + group_incorrect * group_correct;
        correct_below += group_correct;
        i = j;
    }
    Auroc::Defined(doubled as f64 / (2 * n_correct * n_incorrect) as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodMetrics {
    pub method: String,
    pub auarc: f64,
    pub auroc: Auroc,
    pub n: usize,
    pub base_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub metrics: Vec<MethodMetrics>,
    pub curves: Vec<(String, CurvePoints)>,
    pub oracle: CurvePoints,
    pub oracle_auarc: f64,
}

/// Metrics and curves for every method in the table, in table order.
pub fn evaluate(table: &UncertaintyTable) -> Result<EvalReport> {
    let mut metrics = Vec::new();
    let mut curves = Vec::new();
    let mut oracle = None;
    for method in table.methods() {
        let rows = table.rows_for(&method);
        let curve = arc_curve(&rows)?;
        let n = rows.len();
        let base_accuracy = rows.iter().filter(|r| r.correct).count() as f64 / n as f64;
        if oracle.is_none() {
            let labels: Vec<bool> = rows.iter().map(|r| r.correct).collect();
            oracle = Some(oracle_curve(&labels)?);
        }
        metrics.push(MethodMetrics {
            method: method.clone(),
            auarc: auarc(&curve),
            auroc: auroc(&rows),
            n,
            base_accuracy,
        });
        curves.push((method, curve));
    }
    let oracle = oracle.ok_or_else(|| Error::Table("no methods to evaluate".into()))?;
    Ok(EvalReport {
        oracle_auarc: auarc(&oracle),
        metrics,
        curves,
        oracle,
    })
}
