use std::collections::BTreeMap;

use super::embeddings::EmbeddingSet;
use crate::error::{Error, Result};
use crate::learner::nn;

/// Expected score of label-independent embeddings with `n_types` types of
/// `k` tokens each.
pub fn lextest_chance(n_types: usize, k: usize) -> f64 {
    100.0 * (k as f64 - 1.0) / ((n_types * k) as f64 - 1.0)
}

/// Percentage of each token's K-1 nearest neighbors (cosine distance, ties by
/// token id) that share its type, averaged over tokens.
pub fn lextest_score(set: &EmbeddingSet) -> Result<f64> {
    let items = set.items();
    let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
    for it in items {
        *counts.entry(it.type_label).or_default() += 1;
    }
    let k = *counts.values().next().ok_or(Error::EmptyInput("lextest set"))?;
    if let Some((t, n)) = counts.iter().find(|(_, &n)| n != k) {
        return Err(Error::UnbalancedTypes(format!("type {t} has {n} tokens, expected {k}")));
    }
    if k < 2 {
        return Err(Error::UnbalancedTypes(format!("need at least 2 tokens per type, got {k}")));
    }
    let n = items.len();
    let norms: Vec<f64> = items.iter().map(|it| nn::norm(&it.vector)).collect();
    let mut total = 0.0;
    let mut neighbours: Vec<(f64, u64, u32)> = Vec::with_capacity(n);
    for i in 0..n {
        neighbours.clear();
        for j in (0..n).filter(|&j| j != i) {
            let denom = norms[i] * norms[j];
            let cos = if denom < 1e-12 { 0.0 } else { nn::dot(&items[i].vector, &items[j].vector) / denom };
            neighbours.push((1.0 - cos, items[j].token_id, items[j].type_label));
        }
        neighbours.select_nth_unstable_by(k - 2, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let same = neighbours[..k - 1].iter().filter(|n| n.2 == items[i].type_label).count();
        total += same as f64 / (k - 1) as f64;
    }
    Ok(100.0 * total / n as f64)
}
