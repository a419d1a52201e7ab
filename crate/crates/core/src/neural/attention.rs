use alloc::format;
use alloc::vec::Vec;

use super::Matrix;
use crate::{Error, Result};

/// Sum in ascending value order. The result depends only on the multiset
/// of terms, which makes attention exactly permutation equivariant.
fn canonical_sum(terms: &mut [f64]) -> f64 {
    terms.sort_unstable_by(f64::total_cmp);
    terms.iter().sum()
}

fn check(q: &Matrix, k: &Matrix, v: &Matrix, bias: &[f64]) -> Result<()> {
    let n = q.rows();
    if k.rows() != n || v.rows() != n || k.cols() != q.cols() {
        return Err(Error::Shape(format!(
            "Q {:?}, K {:?}, V {:?} are not compatible",
            q.shape(),
            k.shape(),
            v.shape()
        )));
    }
    if bias.len() != n * n {
        return Err(Error::Shape(format!("bias has {} entries, expected {}", bias.len(), n * n)));
    }
    if q.has_non_finite() || k.has_non_finite() || v.has_non_finite() || bias.iter().any(|b| b.is_nan()) {
        return Err(Error::Input("NaN or infinite value in attention input".into()));
    }
    Ok(())
}

/// Row-stochastic `A = softmax(Q K^T / sqrt(d) + beta * B)`, `B` row-major `n x n`.
pub fn attention_weights(q: &Matrix, k: &Matrix, bias: &[f64], beta: f64) -> Result<Matrix> {
    check(q, k, k, bias)?;
    let (n, d) = q.shape();
    let inv_sqrt_d = 1.0 / libm::sqrt(d.max(1) as f64);
    let mut a = Matrix::zeros(n, n);
    let mut exps = Vec::with_capacity(n);
    for i in 0..n {
        let qi = q.row(i);
        let logits: Vec<f64> = (0..n)
            .map(|j| {
                let dot: f64 = qi.iter().zip(k.row(j)).map(|(x, y)| x * y).sum();
                let b = bias[i * n + j];
                // beta * B with beta = 0 must vanish even for B = -inf.
                dot * inv_sqrt_d + if beta == 0.0 { 0.0 } else { beta * b }
            })
            .collect();
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        exps.clear();
        exps.extend(logits.iter().map(|l| libm::exp(l - max)));
        let mut sorted = exps.clone();
        let total = canonical_sum(&mut sorted);
        for (j, e) in exps.iter().enumerate() {
            a.set(i, j, e / total);
        }
    }
    Ok(a)
}

/// Graph-biased scaled dot-product attention, output `A V`.
pub fn graph_attention(q: &Matrix, k: &Matrix, v: &Matrix, bias: &[f64], beta: f64) -> Result<Matrix> {
    check(q, k, v, bias)?;
    let a = attention_weights(q, k, bias, beta)?;
    let (n, dv) = v.shape();
    let mut out = Matrix::zeros(n, dv);
    let mut terms = Vec::with_capacity(n);
    for i in 0..n {
        for c in 0..dv {
            terms.clear();
            terms.extend((0..n).map(|j| a.get(i, j) * v.get(j, c)));
            out.set(i, c, canonical_sum(&mut terms));
        }
    }
    Ok(out)
}
