use serde::{Deserialize, Serialize};

use super::nn;
use crate::error::{Error, Result};

/// Weight of the diversity term inside the auditory loss.
pub const DIVERSITY_WEIGHT: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub loss_aud_r: f64,
    pub loss_aud_d: f64,
    pub loss_aud: f64,
    /// Absent for auditory-only training.
    pub loss_av: Option<f64>,
    pub alpha: f64,
    pub loss_total: f64,
}

/// Combine loss components. With `loss_av = None` the total is the auditory
/// loss alone, whatever `alpha` is.
pub fn total_loss(loss_aud_r: f64, loss_aud_d: f64, loss_av: Option<f64>, alpha: f64) -> LossBreakdown {
    let loss_aud = loss_aud_r + DIVERSITY_WEIGHT * loss_aud_d;
    let loss_total = match loss_av {
        Some(av) => alpha * av + (1.0 - alpha) * loss_aud,
        None => loss_aud,
    };
    LossBreakdown { loss_aud_r, loss_aud_d, loss_aud, loss_av, alpha, loss_total }
}

/// Cross-entropy of a softmax over `logits` with the true class at index 0.
/// Returns the loss and `softmax - onehot(0)`.
pub fn first_class_cross_entropy(logits: &[f64]) -> (f64, Vec<f64>) {
    let lse = nn::log_sum_exp(logits);
    let mut grad = nn::softmax(logits);
    grad[0] -= 1.0;
    (lse - logits[0], grad)
}

/// `(V - perplexity) / V` for a mean code-assignment distribution.
pub fn diversity_penalty(mean_probs: &[f64]) -> f64 {
    let v = mean_probs.len() as f64;
    (v - perplexity(mean_probs)) / v
}

pub(crate) fn perplexity(p: &[f64]) -> f64 {
    let h: f64 = p.iter().filter(|&&x| x > 0.0).map(|&x| -x * x.ln()).sum();
    h.exp()
}

pub(crate) struct InfoNce {
    pub loss: f64,
    pub d_audio: Vec<Vec<f64>>,
    pub d_scene: Vec<Vec<f64>>,
}

/// Bidirectional InfoNCE over dot-product similarities, with gradients.
pub(crate) fn infonce_with_grad(audio: &[Vec<f64>], scenes: &[Vec<f64>], tau: f64) -> Result<InfoNce> {
    let n = audio.len();
    if scenes.len() != n {
        return Err(Error::DimMismatch { expected: n, got: scenes.len() });
    }
    if n == 0 {
        return Err(Error::EmptyInput("empty batch"));
    }
    let e = audio[0].len();
    for v in audio.iter().chain(scenes) {
        if v.len() != e {
            return Err(Error::DimMismatch { expected: e, got: v.len() });
        }
    }
    let mut d_audio = vec![vec![0.0; e]; n];
    let mut d_scene = vec![vec![0.0; e]; n];
    let s: Vec<Vec<f64>> = audio.iter().map(|a| scenes.iter().map(|v| nn::dot(a, v) / tau).collect()).collect();
    let nf = n as f64;
    let mut ds = vec![vec![0.0; n]; n];
    let mut loss = 0.0;
    for i in 0..n {
        let row = &s[i];
        loss += 0.5 * (nn::log_sum_exp(row) - row[i]) / nf;
        let p = nn::softmax(row);
        for j in 0..n {
            ds[i][j] += 0.5 * (p[j] - f64::from(u8::from(i == j))) / nf;
        }
    }
    for j in 0..n {
        let col: Vec<f64> = (0..n).map(|i| s[i][j]).collect();
        loss += 0.5 * (nn::log_sum_exp(&col) - col[j]) / nf;
        let p = nn::softmax(&col);
        for i in 0..n {
            ds[i][j] += 0.5 * (p[i] - f64::from(u8::from(i == j))) / nf;
        }
    }
    for i in 0..n {
        for j in 0..n {
            let g = ds[i][j] / tau;
            if g == 0.0 {
                continue;
            }
            for k in 0..e {
                d_audio[i][k] += g * scenes[j][k];
                d_scene[j][k] += g * audio[i][k];
            }
        }
    }
    Ok(InfoNce { loss, d_audio, d_scene })
}

/// Bidirectional InfoNCE: row `i` of each side is a concurrent pair.
pub fn infonce_loss(audio: &[Vec<f64>], scenes: &[Vec<f64>], tau: f64) -> Result<f64> {
    Ok(infonce_with_grad(audio, scenes, tau)?.loss)
}

/// InfoNCE on a precomputed similarity matrix (before temperature scaling).
pub fn infonce_from_similarities(s: &[Vec<f64>], tau: f64) -> Result<f64> {
    let n = s.len();
    if n == 0 {
        return Err(Error::EmptyInput("empty similarity matrix"));
    }
    if let Some(bad) = s.iter().find(|r| r.len() != n) {
        return Err(Error::DimMismatch { expected: n, got: bad.len() });
    }
    let mut loss = 0.0;
    for i in 0..n {
        let row: Vec<f64> = s[i].iter().map(|v| v / tau).collect();
        let col: Vec<f64> = (0..n).map(|r| s[r][i] / tau).collect();
        loss += 0.5 * (nn::log_sum_exp(&row) - row[i]) + 0.5 * (nn::log_sum_exp(&col) - col[i]);
    }
    Ok(loss / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn infonce_single_pair_is_zero() {
        let l = infonce_loss(&[vec![0.3, 0.4]], &[vec![1.0, -2.0]], 0.1).unwrap();
        assert_eq!(l, 0.0);
    }

    #[test]
    fn infonce_constant_matrix_is_ln_n() {
        for n in [2usize, 5, 16] {
            let s = vec![vec![0.7; n]; n];
            assert_abs_diff_eq!(infonce_from_similarities(&s, 0.1).unwrap(), (n as f64).ln(), epsilon = 1e-12);
            let a = vec![vec![1.0, 0.0]; n];
            assert_abs_diff_eq!(infonce_loss(&a, &a, 0.5).unwrap(), (n as f64).ln(), epsilon = 1e-12);
        }
    }

    #[test]
    fn infonce_hand_example() {
        let s = vec![vec![10.0, 0.0], vec![0.0, 10.0]];
        let expected = -(10f64.exp() / (10f64.exp() + 1.0)).ln();
        assert_abs_diff_eq!(infonce_from_similarities(&s, 1.0).unwrap(), expected, epsilon = 1e-15);
        assert!((expected - 4.54e-5).abs() < 1e-7);
    }

    #[test]
    fn infonce_decreases_with_diagonal_dominance() {
        let mut prev = f64::INFINITY;
        for c in [1.0, 2.0, 4.0, 8.0] {
            let s = vec![vec![c, 0.0, 0.0], vec![0.0, c, 0.0], vec![0.0, 0.0, c]];
            let l = infonce_from_similarities(&s, 1.0).unwrap();
            assert!(l >= 0.0 && l < prev);
            prev = l;
        }
    }

    #[test]
    fn infonce_gradient_matches_finite_differences() {
        let audio = vec![vec![0.3, -0.2, 0.5], vec![-0.1, 0.4, 0.2], vec![0.6, 0.1, -0.3]];
        let scenes = vec![vec![0.2, 0.2, -0.4], vec![0.5, -0.3, 0.1], vec![-0.2, 0.6, 0.3]];
        let g = infonce_with_grad(&audio, &scenes, 0.2).unwrap();
        let eps = 1e-6;
        for i in 0..3 {
            for k in 0..3 {
                let (mut p, mut m) = (audio.clone(), audio.clone());
                p[i][k] += eps;
                m[i][k] -= eps;
                let fd =
                    (infonce_loss(&p, &scenes, 0.2).unwrap() - infonce_loss(&m, &scenes, 0.2).unwrap()) / (2.0 * eps);
                assert_abs_diff_eq!(fd, g.d_audio[i][k], epsilon = 1e-8);
                let (mut p, mut m) = (scenes.clone(), scenes.clone());
                p[i][k] += eps;
                m[i][k] -= eps;
                let fd =
                    (infonce_loss(&audio, &p, 0.2).unwrap() - infonce_loss(&audio, &m, 0.2).unwrap()) / (2.0 * eps);
                assert_abs_diff_eq!(fd, g.d_scene[i][k], epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn infonce_rejects_mismatched_dims() {
        let err = infonce_loss(&[vec![1.0, 2.0]], &[vec![1.0]], 0.1).unwrap_err();
        assert!(matches!(err, Error::DimMismatch { .. }));
    }

    #[test]
    fn uniform_scores_give_ln_of_candidates() {
        let (l, g) = first_class_cross_entropy(&[0.25; 10]);
        assert_abs_diff_eq!(l, 10f64.ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(g.iter().sum::<f64>(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn diversity_extremes() {
        let v = 32;
        assert_abs_diff_eq!(diversity_penalty(&vec![1.0 / v as f64; v]), 0.0, epsilon = 1e-12);
        let mut point = vec![0.0; v];
        point[7] = 1.0;
        assert_abs_diff_eq!(diversity_penalty(&point), (v as f64 - 1.0) / v as f64, epsilon = 1e-15);
        let skew = [0.5, 0.25, 0.125, 0.125];
        let d = diversity_penalty(&skew);
        assert!(d > 0.0 && d < 0.75);
    }

    #[test]
    fn total_loss_decomposition() {
        let b = total_loss(1.5, 0.3, Some(2.0), 0.5);
        assert_eq!(b.loss_aud, 1.5 + 0.1 * 0.3);
        assert_eq!(b.loss_total, 0.5 * 2.0 + 0.5 * b.loss_aud);
        assert_eq!(total_loss(4.0, 0.0, Some(2.0), 1.0).loss_total, 2.0);
        assert_eq!(total_loss(4.0, 0.0, Some(2.0), 0.0).loss_total, 4.0);
        assert_eq!(total_loss(4.0, 0.0, Some(2.0), 0.5).loss_total, 3.0);
        assert_eq!(total_loss(4.0, 0.0, None, 0.5).loss_total, 4.0);
    }
}
