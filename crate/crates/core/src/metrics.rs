//! WER, corpus BLEU and exact-match accuracy, plus the report type the
//! harness emits.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::split_words;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("metric undefined: {0}")]
    Undefined(&'static str),
    #[error("input length mismatch: {0} hypotheses vs {1} references")]
    InputMismatch(usize, usize),
}

/// One step of a minimum-edit alignment between `hyp[i]` and `ref[j]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EditOp {
    Match(usize, usize),
    Substitute(usize, usize),
    /// Extra hypothesis word.
    Insert(usize),
    /// Reference word missing from the hypothesis.
    Delete(usize),
}

/// Levenshtein alignment with unit costs. Among equal-cost paths the diagonal
/// is preferred, so substitutions win over insert+delete pairs.
pub fn align<T: PartialEq>(hyp: &[T], reference: &[T]) -> Vec<EditOp> {
    let (n, m) = (hyp.len(), reference.len());
    let mut d = vec![vec![0usize; m + 1]; n + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for j in 0..=m {
        d[0][j] = j;
    }
    for i in 1..=n {
        for j in 1..=m {
            let sub = d[i - 1][j - 1] + usize::from(hyp[i - 1] != reference[j - 1]);
            d[i][j] = sub.min(d[i - 1][j] + 1).min(d[i][j - 1] + 1);
        }
    }
    let mut ops = Vec::with_capacity(n.max(m));
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        if i > 0 && j > 0 {
            let same = hyp[i - 1] == reference[j - 1];
            if d[i][j] == d[i - 1][j - 1] + usize::from(!same) {
                ops.push(if same {
                    EditOp::Match(i - 1, j - 1)
                } else {
                    EditOp::Substitute(i - 1, j - 1)
                });
                i -= 1;
                j -= 1;
                continue;
            }
        }
        if i > 0 && d[i][j] == d[i - 1][j] + 1 {
            ops.push(EditOp::Insert(i - 1));
            i -= 1;
        } else {
            ops.push(EditOp::Delete(j - 1));
            j -= 1;
        }
    }
    ops.reverse();
    ops
}

pub fn edit_distance<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    align(a, b)
        .iter()
        .filter(|op| !matches!(op, EditOp::Match(..)))
        .count()
}

fn is_punct(c: char) -> bool {
    c.is_ascii_punctuation() || "，。！？、；：“”‘’（）《》".contains(c)
}

/// Lowercases and strips leading/trailing punctuation from every word.
pub fn normalize_words(text: &str) -> Vec<String> {
    split_words(&text.to_lowercase())
        .into_iter()
        .map(|w| w.trim_matches(is_punct).to_string())
        .filter(|w| !w.is_empty())
        .collect()
}

/// Word error rate of `hyp` against `reference` after normalization.
pub fn wer(hyp: &str, reference: &str) -> Result<f64, MetricError> {
    let r = normalize_words(reference);
    if r.is_empty() {
        return Err(MetricError::Undefined("empty reference"));
    }
    let h = normalize_words(hyp);
    Ok(edit_distance(&h, &r) as f64 / r.len() as f64)
}

/// Corpus WER: total edits over total reference words.
pub fn corpus_wer<S: AsRef<str>>(hyps: &[S], refs: &[S]) -> Result<f64, MetricError> {
    if hyps.len() != refs.len() {
        return Err(MetricError::InputMismatch(hyps.len(), refs.len()));
    }
    let (mut edits, mut words) = (0usize, 0usize);
    for (h, r) in hyps.iter().zip(refs) {
        let r = normalize_words(r.as_ref());
        edits += edit_distance(&normalize_words(h.as_ref()), &r);
        words += r.len();
    }
    if words == 0 {
        return Err(MetricError::Undefined("empty reference"));
    }
    Ok(edits as f64 / words as f64)
}

fn ngram_counts(words: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if words.len() >= n {
        for w in words.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

/// Corpus 4-gram BLEU in [0, 100] without smoothing.
pub fn bleu<S: AsRef<str>>(hyps: &[S], refs: &[S]) -> Result<f64, MetricError> {
    if hyps.len() != refs.len() {
        return Err(MetricError::InputMismatch(hyps.len(), refs.len()));
    }
    let mut matches = [0usize; 4];
    let mut totals = [0usize; 4];
    let (mut hyp_len, mut ref_len) = (0usize, 0usize);
    for (h, r) in hyps.iter().zip(refs) {
        let h = split_words(h.as_ref());
        let r = split_words(r.as_ref());
        hyp_len += h.len();
        ref_len += r.len();
        for n in 1..=4 {
            let rc = ngram_counts(&r, n);
            for (gram, c) in ngram_counts(&h, n) {
                matches[n - 1] += c.min(rc.get(gram).copied().unwrap_or(0));
                totals[n - 1] += c;
            }
        }
    }
    if ref_len == 0 {
        return Err(MetricError::Undefined("all references empty"));
    }
    if matches.iter().any(|&m| m == 0) {
        return Ok(0.0);
    }
    let log_precision: f64 = (0..4)
        .map(|i| (matches[i] as f64 / totals[i] as f64).ln())
        .sum::<f64>()
        / 4.0;
    let bp = if hyp_len > ref_len {
        1.0
    } else {
        (1.0 - ref_len as f64 / hyp_len as f64).exp()
    };
    Ok(100.0 * bp * log_precision.exp())
}

fn normalize_label(s: &str) -> String {
    s.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

/// Exact-match fraction after whitespace and case normalization.
pub fn accuracy<S: AsRef<str>>(preds: &[S], labels: &[S]) -> Result<f64, MetricError> {
    if preds.len() != labels.len() {
        return Err(MetricError::InputMismatch(preds.len(), labels.len()));
    }
    if preds.is_empty() {
        return Err(MetricError::Undefined("no items"));
    }
    let hits = preds
        .iter()
        .zip(labels)
        .filter(|(p, l)| normalize_label(p.as_ref()) == normalize_label(l.as_ref()))
        .count();
    Ok(hits as f64 / preds.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemScore {
    pub id: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub task: String,
    pub metric: String,
    /// `None` when the metric is undefined for this set (e.g. nothing aligned).
    pub value: Option<f64>,
    pub support: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub items: Option<Vec<ItemScore>>,
}

/// Fixed-width text table of reports.
pub fn render_table(reports: &[EvalReport]) -> String {
    let mut out = format!("{:<16} {:<12} {:>10} {:>8}\n", "task", "metric", "value", "support");
    for r in reports {
        let value = r
            .value
            .map(|v| format!("{v:.4}"))
            .unwrap_or_else(|| "n/a".into());
        out.push_str(&format!(
            "{:<16} {:<12} {:>10} {:>8}\n",
            r.task, r.metric, value, r.support
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn wer_examples() {
        assert_eq!(wer("a b c", "a b c").unwrap(), 0.0);
        assert!((wer("a x c", "a b c").unwrap() - 1.0 / 3.0).abs() < 1e-12);
        assert!((wer("a c", "a b c").unwrap() - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(wer("a", ""), Err(MetricError::Undefined("empty reference")));
    }

    #[test]
    fn wer_normalizes_case_and_punctuation() {
        assert_eq!(wer("Hello, World.", "hello world").unwrap(), 0.0);
        assert!((wer("我爱他", "我爱你").unwrap() - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn bleu_examples() {
        let refs = ["the cat sat on the mat today", "a quick brown fox jumps"];
        assert!((bleu(&refs, &refs).unwrap() - 100.0).abs() < 1e-9);
        assert_eq!(bleu(&["zz yy xx ww"], &["a b c d"]).unwrap(), 0.0);

        let reference = ["w1 w2 w3 w4 w5 w6 w7 w8"];
        let half = ["w1 w2 w3 w4"];
        let expected = 100.0 * (1.0f64 - 2.0).exp();
        assert!((bleu(&half, &reference).unwrap() - expected).abs() < 1e-9);

        assert_eq!(bleu(&["a"], &["a", "b"]), Err(MetricError::InputMismatch(1, 2)));
    }

    #[test]
    fn accuracy_examples() {
        assert_eq!(accuracy(&["a", "b"], &["a", "b"]).unwrap(), 1.0);
        assert_eq!(accuracy(&["a", "b"], &["c", "d"]).unwrap(), 0.0);
        assert_eq!(accuracy(&["a", "x", "y", "z"], &["A ", "b", "c", "d"]).unwrap(), 0.25);
        assert_eq!(accuracy(&["a"], &["a", "b"]), Err(MetricError::InputMismatch(1, 2)));
    }

    #[test]
    fn alignment_prefers_substitution() {
        let ops = align(&["a", "x", "c"], &["a", "b", "c"]);
        assert_eq!(ops, vec![EditOp::Match(0, 0), EditOp::Substitute(1, 1), EditOp::Match(2, 2)]);
        let ops = align(&["a", "c"], &["a", "b", "c"]);
        assert_eq!(ops, vec![EditOp::Match(0, 0), EditOp::Delete(1), EditOp::Match(1, 2)]);
    }

    fn sentence() -> impl Strategy<Value = String> {
        prop::collection::vec(prop::sample::select(vec!["a", "b", "c", "d", "e"]), 1..12)
            .prop_map(|w| w.join(" "))
    }

    proptest! {
        #[test]
        fn wer_edit_symmetry(a in sentence(), b in sentence()) {
            let la = normalize_words(&a).len() as f64;
            let lb = normalize_words(&b).len() as f64;
            let lhs = wer(&a, &b).unwrap() * lb;
            let rhs = wer(&b, &a).unwrap() * la;
            prop_assert!((lhs - rhs).abs() < 1e-9);
        }

        #[test]
        fn bleu_bounded_and_monotone(
            pairs in prop::collection::vec((sentence(), sentence()), 1..6),
            extra in sentence(),
        ) {
            let hyps: Vec<String> = pairs.iter().map(|p| p.0.clone()).collect();
            let refs: Vec<String> = pairs.iter().map(|p| p.1.clone()).collect();
            let base = bleu(&hyps, &refs).unwrap();
            prop_assert!((0.0..=100.0 + 1e-9).contains(&base));
            let hyp_len: usize = hyps.iter().map(|h| split_words(h).len()).sum();
            let ref_len: usize = refs.iter().map(|r| split_words(r).len()).sum();
            if hyp_len > ref_len {
                let mut h2 = hyps.clone();
                let mut r2 = refs.clone();
                h2.push(extra.clone());
                r2.push(extra);
                prop_assert!(bleu(&h2, &r2).unwrap() + 1e-9 >= base);
            }
        }
    }
}
