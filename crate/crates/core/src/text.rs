//! Rouge-L, correctness labelling and the lexical-similarity baseline.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::ResponseBundle;
use crate::error::{Error, Result};

/// Default Rouge-L correctness threshold.
pub const ROUGE_L_THRESHOLD: f64 = 0.3;
/// Default GPT-score correctness threshold.
pub const GPT_SCORE_THRESHOLD: f64 = 0.7;
/// External score consulted by [`Criterion::GptScore`].
pub const GPT_SCORE_KEY: &str = "gpt_correctness";

/// Lowercases and splits on every maximal run of non-alphanumeric characters.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_owned)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RougeScore {
    pub precision: f64,
    pub recall: f64,
    pub fmeasure: f64,
}

impl RougeScore {
    fn from_lcs(lcs: usize, candidate_len: usize, reference_len: usize) -> Self {
        let ratio = |n: usize| if n == 0 { 0.0 } else { lcs as f64 / n as f64 };
        let precision = ratio(candidate_len);
        let recall = ratio(reference_len);
        let fmeasure = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Self {
            precision,
            recall,
            fmeasure,
        }
    }
}

/// Length of the longest common subsequence, O(|a|·|b|) time, O(|b|) space.
pub fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y {
                prev[j] + 1
            } else {
                cur[j].max(prev[j + 1])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Rouge-L with β = 1.
pub fn rouge_l<T: PartialEq>(candidate: &[T], reference: &[T]) -> RougeScore {
    RougeScore::from_lcs(lcs_len(candidate, reference), candidate.len(), reference.len())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    RougeL,
    GptScore,
}

impl Criterion {
    pub fn default_threshold(self) -> f64 {
        match self {
            Criterion::RougeL => ROUGE_L_THRESHOLD,
            Criterion::GptScore => GPT_SCORE_THRESHOLD,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Criterion::RougeL => "rouge_l",
            Criterion::GptScore => "gpt_score",
        }
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Criterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rouge_l" | "rouge-l" => Ok(Criterion::RougeL),
            "gpt_score" | "gpt-score" => Ok(Criterion::GptScore),
            _ => Err(Error::Unknown {
                kind: "criterion",
                value: s.to_owned(),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrectnessLabel {
    pub question_id: String,
    pub response_index: usize,
    pub criterion: Criterion,
    pub score: f64,
    pub threshold: f64,
    pub correct: bool,
}

/// Scores one response and marks it correct when `score > threshold`.
///
/// Rouge-L takes the best F-measure over all references.
pub fn label_correct(
    bundle: &ResponseBundle,
    response_index: usize,
    criterion: Criterion,
    threshold: f64,
) -> Result<CorrectnessLabel> {
    let response = bundle.responses.get(response_index).ok_or_else(|| {
        Error::MissingField(format!(
            "bundle `{}` has no response {response_index}",
            bundle.question_id
        ))
    })?;
    let score = match criterion {
        Criterion::RougeL => {
            if bundle.references.is_empty() {
                return Err(Error::MissingField(format!(
                    "bundle `{}` has no references",
                    bundle.question_id
                )));
            }
            let cand = tokenize(response);
            bundle
                .references
                .iter()
                .map(|r| rouge_l(&cand, &tokenize(r)).fmeasure)
                .fold(f64::NEG_INFINITY, f64::max)
        }
        Criterion::GptScore => *bundle
            .external_score(GPT_SCORE_KEY)
            .and_then(|s| s.get(response_index))
            .ok_or_else(|| {
                Error::MissingField(format!(
                    "bundle `{}` lacks external_scores[{GPT_SCORE_KEY}]",
                    bundle.question_id
                ))
            })?,
    };
    Ok(CorrectnessLabel {
        question_id: bundle.question_id.clone(),
        response_index,
        criterion,
        score,
        threshold,
        correct: score > threshold,
    })
}

/// `1 − mean pairwise Rouge-L F` over unordered response pairs.
pub fn lexi_sim_uncertainty<S: AsRef<str>>(responses: &[S]) -> Result<f64> {
    let m = responses.len();
    if m < 2 {
        return Err(Error::TooFew { needed: 2, got: m });
    }
    let tokens: Vec<Vec<String>> = responses.iter().map(|r| tokenize(r.as_ref())).collect();
    let mut total = 0.0;
    for i in 0..m {
        for j in i + 1..m {
            total += rouge_l(&tokens[i], &tokens[j]).fmeasure;
        }
    }
    let pairs = (m * (m - 1) / 2) as f64;
    Ok(1.0 - total / pairs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toks(s: &[&str]) -> Vec<String> {
        s.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn tokenize_examples() {
        assert_eq!(tokenize("The cat sat."), toks(&["the", "cat", "sat"]));
        assert!(tokenize("").is_empty());
        assert_eq!(
            tokenize("It's 42, isn't it?"),
            toks(&["it", "s", "42", "isn", "t", "it"])
        );
        assert_eq!(tokenize("Ünïcode\u{2014}ÉTÉ"), toks(&["ünïcode", "été"]));
    }

    #[test]
    fn rouge_l_examples() {
        let s = rouge_l(
            &toks(&["the", "cat", "sat"]),
            &toks(&["the", "cat", "sat", "on", "the", "mat"]),
        );
        assert_eq!(s.precision, 1.0);
        assert_eq!(s.recall, 0.5);
        assert!((s.fmeasure - 2.0 / 3.0).abs() < 1e-15);

        let same = toks(&["a", "b", "c"]);
        let s = rouge_l(&same, &same);
        assert_eq!((s.precision, s.recall, s.fmeasure), (1.0, 1.0, 1.0));

        let s = rouge_l(&toks(&["a", "b"]), &toks(&["c", "d"]));
        assert_eq!((s.precision, s.recall, s.fmeasure), (0.0, 0.0, 0.0));

        let s = rouge_l::<String>(&[], &[]);
        assert_eq!(s.fmeasure, 0.0);
    }

    fn bundle_with(refs: &[&str], responses: &[&str]) -> ResponseBundle {
        ResponseBundle::new(
            "q",
            "?",
            refs.iter().map(|s| s.to_string()).collect(),
            responses.iter().map(|s| s.to_string()).collect(),
        )
    }

    #[test]
    fn label_strict_threshold() {
        let mut b = bundle_with(&["x"], &["a", "b"]);
        b.external_scores = Some([(GPT_SCORE_KEY.to_string(), vec![0.7, 0.31])].into());
        let l = label_correct(&b, 0, Criterion::GptScore, 0.7).unwrap();
        assert!(!l.correct);
        let l = label_correct(&b, 1, Criterion::GptScore, 0.3).unwrap();
        assert!(l.correct);
    }

    #[test]
    fn label_takes_best_reference() {
        // candidate "a b c d e": vs "a z z z z z z z z z" F=2*(1/5)(1/10)/(3/10)=0.1333,
        // vs "a b c" F = 2*(3/5)(1)/(8/5) = 0.75
        let b = bundle_with(&["a z z z z z z z z z", "a b c"], &["a b c d e", "q"]);
        let l = label_correct(&b, 0, Criterion::RougeL, 0.3).unwrap();
        assert!((l.score - 0.75).abs() < 1e-15);
        assert!(l.correct);
    }

    #[test]
    fn label_two_references_point_one_and_point_six() {
        // F=0.1: cand 10 tokens, ref 10 tokens, LCS 1. F=0.6: cand 10, ref 10, LCS 6.
        let cand = "a b c d e f g h i j";
        let low = "a k l m n o p q r s";
        let high = "a b c d e f t u v w";
        let b = bundle_with(&[low, high], &[cand, "x"]);
        let l = label_correct(&b, 0, Criterion::RougeL, 0.3).unwrap();
        assert!((l.score - 0.6).abs() < 1e-15);
        assert!(l.correct);
    }

    #[test]
    fn label_missing_gpt_score() {
        let b = bundle_with(&["x"], &["a", "b"]);
        assert!(label_correct(&b, 0, Criterion::GptScore, 0.7).is_err());
    }

    #[test]
    fn lexisim_examples() {
        assert_eq!(lexi_sim_uncertainty(&["a b"; 4]).unwrap(), 0.0);
        assert_eq!(lexi_sim_uncertainty(&["a", "b", "c"]).unwrap(), 1.0);
        let u = lexi_sim_uncertainty(&["a b", "a c", "d e"]).unwrap();
        assert!((u - 5.0 / 6.0).abs() < 1e-15);
        assert!(lexi_sim_uncertainty(&["only"]).is_err());
    }

    proptest! {
        #[test]
        fn precision_recall_swap(a in prop::collection::vec(0u8..4, 0..10),
                                 b in prop::collection::vec(0u8..4, 0..10)) {
            let ab = rouge_l(&a, &b);
            let ba = rouge_l(&b, &a);
            prop_assert_eq!(ab.precision, ba.recall);
            prop_assert_eq!(ab.recall, ba.precision);
            prop_assert!((0.0..=1.0).contains(&ab.fmeasure));
        }

        #[test]
        fn lexisim_permutation_invariant(words in prop::collection::vec("[a-c]{1,2}( [a-c]{1,2}){0,3}", 2..6),
                                         rot in 0usize..6) {
            let mut shuffled = words.clone();
            let k = rot % shuffled.len();
            shuffled.rotate_left(k);
            shuffled.reverse();
            let a = lexi_sim_uncertainty(&words).unwrap();
            let b = lexi_sim_uncertainty(&shuffled).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
        }

        #[test]
        fn threshold_monotone(score in 0.0f64..1.0, t1 in 0.0f64..1.0, t2 in 0.0f64..1.0) {
            let mut b = bundle_with(&["x"], &["a", "b"]);
            b.external_scores = Some([(GPT_SCORE_KEY.to_string(), vec![score, 0.0])].into());
            let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
            let l_lo = label_correct(&b, 0, Criterion::GptScore, lo).unwrap();
            let l_hi = label_correct(&b, 0, Criterion::GptScore, hi).unwrap();
            prop_assert!(!(l_hi.correct && !l_lo.correct));
        }
    }
}
