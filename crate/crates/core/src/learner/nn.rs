//! Dense kernels shared by the encoders. Matrices are row-major with
//! `rows = out.len()` and `cols = x.len()`.

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `out = W x + b`
pub fn affine(w: &[f64], b: &[f64], x: &[f64], out: &mut [f64]) {
    let cols = x.len();
    for (i, o) in out.iter_mut().enumerate() {
        *o = b[i] + dot(&w[i * cols..(i + 1) * cols], x);
    }
}

/// `out += W x`
pub fn acc_matvec(w: &[f64], x: &[f64], out: &mut [f64]) {
    let cols = x.len();
    for (i, o) in out.iter_mut().enumerate() {
        *o += dot(&w[i * cols..(i + 1) * cols], x);
    }
}

/// `dx += Wᵀ dy`
pub fn acc_matvec_t(w: &[f64], dy: &[f64], dx: &mut [f64]) {
    let cols = dx.len();
    for (i, &g) in dy.iter().enumerate() {
        if g == 0.0 {
            continue;
        }
        let row = &w[i * cols..(i + 1) * cols];
        dx.iter_mut().zip(row).for_each(|(d, w)| *d += g * w);
    }
}

/// `dW += dy xᵀ`
pub fn acc_outer(dw: &mut [f64], dy: &[f64], x: &[f64]) {
    let cols = x.len();
    for (i, &g) in dy.iter().enumerate() {
        if g == 0.0 {
            continue;
        }
        let row = &mut dw[i * cols..(i + 1) * cols];
        row.iter_mut().zip(x).for_each(|(d, v)| *d += g * v);
    }
}

pub fn add_into(dst: &mut [f64], src: &[f64]) {
    dst.iter_mut().zip(src).for_each(|(d, s)| *d += s);
}

/// In-place `tanh`.
pub fn tanh_inplace(v: &mut [f64]) {
    v.iter_mut().for_each(|x| *x = x.tanh());
}

/// `grad *= 1 - y²` for `y = tanh(·)`.
pub fn tanh_backward(y: &[f64], grad: &mut [f64]) {
    grad.iter_mut().zip(y).for_each(|(g, y)| *g *= 1.0 - y * y);
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let sum: f64 = out.iter().sum();
    out.iter_mut().for_each(|p| *p /= sum);
    out
}

pub fn log_sum_exp(logits: &[f64]) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln()
}

pub fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// Cosine similarity, 0 when either vector is (numerically) zero.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let d = norm(a) * norm(b);
    if d < 1e-12 {
        0.0
    } else {
        dot(a, b) / d
    }
}

/// Gradient of `scale * cos(a, b)` accumulated into `da` and `db`.
pub fn cosine_backward(a: &[f64], b: &[f64], scale: f64, da: &mut [f64], db: &mut [f64]) {
    let (na, nb) = (norm(a), norm(b));
    if na * nb < 1e-12 || scale == 0.0 {
        return;
    }
    let cos = dot(a, b) / (na * nb);
    let inv = 1.0 / (na * nb);
    for i in 0..a.len() {
        da[i] += scale * (b[i] * inv - cos * a[i] / (na * na));
        db[i] += scale * (a[i] * inv - cos * b[i] / (nb * nb));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softmax_and_lse_agree() {
        let l = [1.0, -2.0, 0.5, 3.0];
        let p = softmax(&l);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        let lse = log_sum_exp(&l);
        for (pi, li) in p.iter().zip(l) {
            assert!((pi.ln() - (li - lse)).abs() < 1e-12);
        }
    }

    #[test]
    fn cosine_gradient_matches_finite_differences() {
        let a = [0.3, -1.2, 0.7];
        let b = [1.1, 0.4, -0.2];
        let (mut da, mut db) = ([0.0; 3], [0.0; 3]);
        cosine_backward(&a, &b, 1.0, &mut da, &mut db);
        let eps = 1e-6;
        for i in 0..3 {
            let (mut ap, mut am) = (a, a);
            ap[i] += eps;
            am[i] -= eps;
            let fd = (cosine(&ap, &b) - cosine(&am, &b)) / (2.0 * eps);
            assert!((fd - da[i]).abs() < 1e-8);
        }
        assert_eq!(cosine(&[0.0; 3], &b), 0.0);
    }
}
