use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Recall {
    pub speech_to_image: f64,
    pub image_to_speech: f64,
    pub mean: f64,
}

/// Fraction of true pairs (the diagonal of `s`) ranked within the top `k`,
/// in both directions. Ties go to the lower index.
pub fn recall_at_k(s: &[Vec<f64>], k: usize) -> Result<Recall> {
    let n = s.len();
    if k == 0 || k > n {
        return Err(Error::BadK { k, n });
    }
    if let Some(row) = s.iter().find(|r| r.len() != n) {
        return Err(Error::DimMismatch { expected: n, got: row.len() });
    }
    let rank = |i: usize, get: &dyn Fn(usize) -> f64| {
        let d = get(i);
        (0..n).filter(|&j| j != i && (get(j) > d || (get(j) == d && j < i))).count()
    };
    let mut rows = 0;
    let mut cols = 0;
    for (i, row) in s.iter().enumerate() {
        if rank(i, &|j| row[j]) < k {
            rows += 1;
        }
        if rank(i, &|j| s[j][i]) < k {
            cols += 1;
        }
    }
    let speech_to_image = rows as f64 / n as f64;
    let image_to_speech = cols as f64 / n as f64;
    Ok(Recall { speech_to_image, image_to_speech, mean: 0.5 * (speech_to_image + image_to_speech) })
}

/// Number of categories scoring strictly above `threshold` percent.
pub fn vocab_size(per_category: &[f64], threshold: f64) -> usize {
    per_category.iter().filter(|&&s| s > threshold).count()
}

/// Two binomial standard errors, in percentage points, of a per-category
/// Semtest score with `k` tokens and images over `n_categories` categories.
pub fn chance_band(k: usize, n_categories: usize) -> f64 {
    let trials = (k * k * n_categories.saturating_sub(1)).max(1) as f64;
    2.0 * 100.0 * (0.25 / trials).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_matrix_recalls_everything() {
        let s: Vec<Vec<f64>> = (0..4).map(|i| (0..4).map(|j| f64::from(u8::from(i == j))).collect()).collect();
        for k in 1..=4 {
            assert_eq!(recall_at_k(&s, k).unwrap().mean, 1.0);
        }
    }

    #[test]
    fn hand_built_three_by_three() {
        let s = vec![vec![0.9, 0.1, 0.0], vec![0.8, 0.5, 0.1], vec![0.0, 0.1, 0.7]];
        let r = recall_at_k(&s, 1).unwrap();
        assert!((r.speech_to_image - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(recall_at_k(&s, 3).unwrap().mean, 1.0);
        assert!(matches!(recall_at_k(&s, 0), Err(Error::BadK { .. })));
        assert!(matches!(recall_at_k(&s, 4), Err(Error::BadK { .. })));
    }

    #[test]
    fn ties_go_to_lower_index() {
        let s = vec![vec![1.0; 3]; 3];
        let r = recall_at_k(&s, 1).unwrap();
        assert!((r.mean - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn vocabulary_counts() {
        let v = [55.0, 70.0, 85.0];
        assert_eq!([50.0, 66.7, 80.0].map(|t| vocab_size(&v, t)), [3, 2, 1]);
        assert_eq!(vocab_size(&[100.0; 5], 99.0), 5);
    }

    #[test]
    fn chance_band_shrinks_with_more_trials() {
        assert!((chance_band(20, 80) - 2.0 * 100.0 * (0.25f64 / 31600.0).sqrt()).abs() < 1e-12);
        assert!(chance_band(20, 20) > chance_band(20, 80));
    }
}
