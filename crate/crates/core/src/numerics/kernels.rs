//! Slice-level kernels. All reductions run in a fixed sequential order so
//! repeated calls are bit-identical.

use super::Real;

/// `c = a · b` with `a: m x n`, `b: n x p`.
pub fn matmul<T: Real>(a: &[T], b: &[T], m: usize, n: usize, p: usize) -> Vec<T> {
    let mut c = vec![T::zero(); m * p];
    for i in 0..m {
        let c_row = &mut c[i * p..(i + 1) * p];
        for (l, &a_il) in a[i * n..(i + 1) * n].iter().enumerate() {
            if a_il == T::zero() {
                continue;
            }
            let b_row = &b[l * p..(l + 1) * p];
            for (c_ij, &b_lj) in c_row.iter_mut().zip(b_row) {
                *c_ij = *c_ij + a_il * b_lj;
            }
        }
    }
    c
}

/// `c = a · bᵀ` with `a: m x n`, `b: p x n`.
pub fn matmul_nt<T: Real>(a: &[T], b: &[T], m: usize, n: usize, p: usize) -> Vec<T> {
    let mut c = vec![T::zero(); m * p];
    for i in 0..m {
        let a_row = &a[i * n..(i + 1) * n];
        for j in 0..p {
            let b_row = &b[j * n..(j + 1) * n];
            c[i * p + j] = dot(a_row, b_row);
        }
    }
    c
}

/// `c = aᵀ · b` with `a: m x n`, `b: m x p`, result `n x p`.
pub fn matmul_tn<T: Real>(a: &[T], b: &[T], m: usize, n: usize, p: usize) -> Vec<T> {
    let mut c = vec![T::zero(); n * p];
    for l in 0..m {
        let b_row = &b[l * p..(l + 1) * p];
        for (i, &a_li) in a[l * n..(l + 1) * n].iter().enumerate() {
            if a_li == T::zero() {
                continue;
            }
            let c_row = &mut c[i * p..(i + 1) * p];
            for (c_ij, &b_lj) in c_row.iter_mut().zip(b_row) {
                *c_ij = *c_ij + a_li * b_lj;
            }
        }
    }
    c
}

#[inline]
pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    // Four independent accumulators let the compiler vectorize while keeping
    // a fixed summation order.
    let mut acc = [T::zero(); 4];
    let chunks = a.len() / 4;
    for k in 0..chunks {
        let i = 4 * k;
        acc[0] = acc[0] + a[i] * b[i];
        acc[1] = acc[1] + a[i + 1] * b[i + 1];
        acc[2] = acc[2] + a[i + 2] * b[i + 2];
        acc[3] = acc[3] + a[i + 3] * b[i + 3];
    }
    let mut tail = T::zero();
    for i in 4 * chunks..a.len() {
        tail = tail + a[i] * b[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Row-wise softmax with max subtraction.
pub fn row_softmax<T: Real>(x: &[T], rows: usize, cols: usize) -> Vec<T> {
    let mut out = vec![T::zero(); rows * cols];
    for r in 0..rows {
        let row = &x[r * cols..(r + 1) * cols];
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let dst = &mut out[r * cols..(r + 1) * cols];
        let mut sum = T::zero();
        for (d, &v) in dst.iter_mut().zip(row) {
            *d = (v - max).exp();
            sum = sum + *d;
        }
        let inv = T::one() / sum;
        for d in dst.iter_mut() {
            *d = *d * inv;
        }
    }
    out
}

/// Cached intermediates of a layer-norm forward pass.
#[derive(Debug, Clone)]
pub struct LayerNormCache<T> {
    pub normalized: Vec<T>,
    pub inv_std: Vec<T>,
}

/// Per-row `(x - mean) / sqrt(var + eps) * gain + bias` with population variance.
pub fn layer_norm<T: Real>(
    x: &[T],
    gain: &[T],
    bias: &[T],
    rows: usize,
    cols: usize,
    eps: T,
) -> (Vec<T>, LayerNormCache<T>) {
    let n = T::c(cols as f64);
    let mut out = vec![T::zero(); rows * cols];
    let mut normalized = vec![T::zero(); rows * cols];
    let mut inv_std = Vec::with_capacity(rows);
    for r in 0..rows {
        let row = &x[r * cols..(r + 1) * cols];
        let mean = row.iter().copied().sum::<T>() / n;
        let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / n;
        let istd = T::one() / (var + eps).sqrt();
        inv_std.push(istd);
        for c in 0..cols {
            let xh = (row[c] - mean) * istd;
            normalized[r * cols + c] = xh;
            out[r * cols + c] = xh * gain[c] + bias[c];
        }
    }
    (
        out,
        LayerNormCache {
            normalized,
            inv_std,
        },
    )
}

const GELU_COEF: f64 = 0.044715;

fn sqrt_2_over_pi<T: Real>() -> T {
    T::c((2.0 / std::f64::consts::PI).sqrt())
}

/// tanh approximation `0.5 x (1 + tanh(sqrt(2/pi) (x + 0.044715 x^3)))`.
#[inline]
pub fn gelu<T: Real>(x: T) -> T {
    let inner = sqrt_2_over_pi::<T>() * (x + T::c(GELU_COEF) * x * x * x);
    T::c(0.5) * x * (T::one() + inner.tanh())
}

#[inline]
pub fn gelu_grad<T: Real>(x: T) -> T {
    let s = sqrt_2_over_pi::<T>();
    let inner = s * (x + T::c(GELU_COEF) * x * x * x);
    let t = inner.tanh();
    let d_inner = s * (T::one() + T::c(3.0 * GELU_COEF) * x * x);
    T::c(0.5) * (T::one() + t) + T::c(0.5) * x * (T::one() - t * t) * d_inner
}

/// Stable `max(x,0) - x·y + log(1 + exp(-|x|))`.
#[inline]
pub fn bce_with_logits<T: Real>(logit: T, label: T) -> T {
    logit.max(T::zero()) - logit * label + (-logit.abs()).exp().ln_1p()
}

#[inline]
pub fn sigmoid<T: Real>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}
