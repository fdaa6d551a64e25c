use std::collections::BTreeMap;

use super::embeddings::EmbeddingSet;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SemtestResult {
    /// Sorted category labels.
    pub categories: Vec<u32>,
    /// Percent correct per category, aligned with `categories`.
    pub per_category: Vec<f64>,
    pub mean: f64,
}

fn balanced(labels: &[u32], what: &str) -> Result<BTreeMap<u32, usize>> {
    let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
    for &l in labels {
        *counts.entry(l).or_default() += 1;
    }
    let k = *counts.values().next().ok_or_else(|| Error::CategoryMismatch(format!("no {what}")))?;
    if let Some((c, n)) = counts.iter().find(|(_, &n)| n != k) {
        return Err(Error::CategoryMismatch(format!("{what}: category {c} has {n} items, expected {k}")));
    }
    Ok(counts)
}

/// Forced-choice word-meaning score from a precomputed `words × objects`
/// score matrix. Each word token is scored on every (correct, mismatched)
/// object pair; a win counts 1 and a tie 0.5.
pub fn semtest_from_scores(word_labels: &[u32], object_labels: &[u32], scores: &[Vec<f64>]) -> Result<SemtestResult> {
    let wc = balanced(word_labels, "words")?;
    let oc = balanced(object_labels, "objects")?;
    if !wc.keys().eq(oc.keys()) {
        return Err(Error::CategoryMismatch("word and object categories differ".into()));
    }
    if wc.len() < 2 {
        return Err(Error::CategoryMismatch("need at least 2 categories".into()));
    }
    if scores.len() != word_labels.len() {
        return Err(Error::LengthMismatch(word_labels.len(), scores.len()));
    }
    let mut sum: BTreeMap<u32, (f64, usize)> = wc.keys().map(|&c| (c, (0.0, 0))).collect();
    for (row, &c) in scores.iter().zip(word_labels) {
        if row.len() != object_labels.len() {
            return Err(Error::LengthMismatch(object_labels.len(), row.len()));
        }
        let mut wrong: Vec<f64> = row.iter().zip(object_labels).filter(|(_, &l)| l != c).map(|(s, _)| *s).collect();
        wrong.sort_by(f64::total_cmp);
        let mut wins = 0.0;
        let mut n = 0usize;
        for (&s, _) in row.iter().zip(object_labels).filter(|(_, &l)| l == c) {
            let below = wrong.partition_point(|&w| w < s);
            let tied = wrong.partition_point(|&w| w <= s) - below;
            wins += below as f64 + 0.5 * tied as f64;
            n += wrong.len();
        }
        let e = sum.get_mut(&c).expect("category present");
        e.0 += wins / n as f64;
        e.1 += 1;
    }
    let categories: Vec<u32> = sum.keys().copied().collect();
    let per_category: Vec<f64> = sum.values().map(|(s, n)| 100.0 * s / *n as f64).collect();
    let mean = per_category.iter().sum::<f64>() / per_category.len() as f64;
    Ok(SemtestResult { categories, per_category, mean })
}

/// Semtest with `scorer(word_vector, object_vector)`.
pub fn semtest_score(
    words: &EmbeddingSet,
    objects: &EmbeddingSet,
    scorer: impl Fn(&[f64], &[f64]) -> f64,
) -> Result<SemtestResult> {
    let scores: Vec<Vec<f64>> =
        words.items().iter().map(|w| objects.items().iter().map(|o| scorer(&w.vector, &o.vector)).collect()).collect();
    semtest_from_scores(&words.type_labels(), &objects.type_labels(), &scores)
}
