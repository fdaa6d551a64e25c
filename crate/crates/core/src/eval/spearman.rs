use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

pub const DEFAULT_PERMUTATIONS: usize = 100_000;
const PERMUTATION_SEED: u64 = 0x5eed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpearmanResult {
    pub rho: f64,
    /// Two-sided permutation p-value.
    pub p: f64,
}

/// 1-based ranks, ties sharing their average rank.
pub fn rank_average(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

fn centered(r: &[f64]) -> Vec<f64> {
    let m = r.iter().sum::<f64>() / r.len() as f64;
    r.iter().map(|v| v - m).collect()
}

fn pearson_centered(a: &[f64], b: &[f64], na: f64, nb: f64) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / (na * nb)
}

pub fn spearman(x: &[f64], y: &[f64]) -> Result<SpearmanResult> {
    spearman_with(x, y, DEFAULT_PERMUTATIONS, PERMUTATION_SEED)
}

/// Spearman rho with a seeded permutation test.
pub fn spearman_with(x: &[f64], y: &[f64], n_permutations: usize, seed: u64) -> Result<SpearmanResult> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 3 {
        return Err(Error::DegenerateInput("spearman needs at least 3 observations"));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::DegenerateInput("non-finite observation"));
    }
    let rx = centered(&rank_average(x));
    let mut ry = centered(&rank_average(y));
    let nx = rx.iter().map(|v| v * v).sum::<f64>().sqrt();
    let ny = ry.iter().map(|v| v * v).sum::<f64>().sqrt();
    if nx == 0.0 || ny == 0.0 {
        return Err(Error::DegenerateInput("constant input vector"));
    }
    let rho = pearson_centered(&rx, &ry, nx, ny).clamp(-1.0, 1.0);
    let mut rng = rng::rng_from(seed);
    let threshold = rho.abs() - 1e-12;
    let mut extreme = 0usize;
    for _ in 0..n_permutations {
        ry.shuffle(&mut rng);
        if pearson_centered(&rx, &ry, nx, ny).abs() >= threshold {
            extreme += 1;
        }
    }
    let p = (extreme + 1) as f64 / (n_permutations + 1) as f64;
    Ok(SpearmanResult { rho, p })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_example() {
        let r = spearman_with(&[1.0, 2.0, 3.0, 4.0], &[2.0, 1.0, 4.0, 3.0], 1000, 1).unwrap();
        assert!((r.rho - 0.6).abs() < 1e-12);
    }

    #[test]
    fn perfect_orderings() {
        let x = [1.0, 2.5, 3.0, 7.0, 9.0];
        let up = spearman_with(&x, &x, 1000, 1).unwrap();
        assert!((up.rho - 1.0).abs() < 1e-12);
        let rev: Vec<f64> = x.iter().rev().copied().collect();
        assert!((spearman_with(&x, &rev, 1000, 1).unwrap().rho + 1.0).abs() < 1e-12);
        // 2 of 120 orderings are as extreme.
        let big = spearman_with(&x, &x, 20000, 2).unwrap();
        assert!((big.p - 2.0 / 120.0).abs() < 0.005, "{}", big.p);
    }

    #[test]
    fn ties_use_average_ranks() {
        assert_eq!(rank_average(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    #[test]
    fn errors() {
        assert!(matches!(spearman(&[1.0, 2.0, 3.0], &[1.0, 2.0]), Err(Error::LengthMismatch(3, 2))));
        assert!(matches!(spearman(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]), Err(Error::DegenerateInput(_))));
    }
}
