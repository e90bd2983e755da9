//! Fused scaled dot-product attention.
//!
//! The `n×n` weight matrix is never stored: the forward pass and the backward
//! pass both walk the query rows in blocks and recompute the weights.

use rand::Rng as _;

use crate::rng::{rng_for, stream};
use crate::tensor::{gemm, Tensor};

const BLOCK: usize = 64;

/// Dropout on the attention weights: probability and the per-op seed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct AttnDropout {
    pub p: f64,
    pub seed: u64,
}

impl AttnDropout {
    /// Inverted-dropout multipliers for one row of weights.
    fn row_mask(&self, row: usize, len: usize) -> Vec<f64> {
        let mut rng = rng_for(self.seed, &[stream::DROPOUT, row as u64]);
        let keep = 1.0 / (1.0 - self.p);
        (0..len)
            .map(|_| if rng.gen::<f64>() < self.p { 0.0 } else { keep })
            .collect()
    }
}

fn rows_of(t: &Tensor, start: usize, end: usize) -> Tensor {
    let c = t.cols();
    Tensor::from_vec(end - start, c, t.data()[start * c..end * c].to_vec()).expect("row block")
}

/// Softmax weights for query rows `start..end`, before dropout.
fn block_weights(q: &Tensor, k: &Tensor, scale: f64, start: usize, end: usize) -> (Tensor, Tensor) {
    let qb = rows_of(q, start, end);
    let mut s = Tensor::zeros(end - start, k.rows());
    gemm(false, true, scale, &qb, k, 0.0, &mut s);
    for i in 0..s.rows() {
        let row = s.row_slice_mut(i);
        let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for v in row.iter_mut() {
            *v = (*v - m).exp();
            total += *v;
        }
        row.iter_mut().for_each(|v| *v /= total);
    }
    (qb, s)
}

/// `softmax(scale · q kᵀ)` row by row.
pub fn attention_weights(q: &Tensor, k: &Tensor, scale: f64) -> Tensor {
    block_weights(q, k, scale, 0, q.rows()).1
}

fn apply_dropout(p: &mut Tensor, drop: Option<AttnDropout>, start: usize) {
    if let Some(d) = drop {
        for i in 0..p.rows() {
            let mask = d.row_mask(start + i, p.cols());
            p.row_slice_mut(i)
                .iter_mut()
                .zip(&mask)
                .for_each(|(v, m)| *v *= m);
        }
    }
}

pub(crate) fn forward(
    q: &Tensor,
    k: &Tensor,
    v: &Tensor,
    scale: f64,
    drop: Option<AttnDropout>,
) -> Tensor {
    let n = q.rows();
    let mut out = Tensor::zeros(n, v.cols());
    let mut start = 0;
    while start < n {
        let end = (start + BLOCK).min(n);
        let (_, mut p) = block_weights(q, k, scale, start, end);
        apply_dropout(&mut p, drop, start);
        let mut ob = Tensor::zeros(end - start, v.cols());
        gemm(false, false, 1.0, &p, v, 0.0, &mut ob);
        let c = v.cols();
        out.data_mut()[start * c..end * c].copy_from_slice(ob.data());
        start = end;
    }
    out
}

/// Gradients with respect to `q`, `k` and `v` given the output gradient `g`.
pub(crate) fn backward(
    q: &Tensor,
    k: &Tensor,
    v: &Tensor,
    scale: f64,
    drop: Option<AttnDropout>,
    g: &Tensor,
) -> (Tensor, Tensor, Tensor) {
    let n = q.rows();
    let mut dq = Tensor::zeros(q.rows(), q.cols());
    let mut dk = Tensor::zeros(k.rows(), k.cols());
    let mut dv = Tensor::zeros(v.rows(), v.cols());
    let mut start = 0;
    while start < n {
        let end = (start + BLOCK).min(n);
        let (qb, p) = block_weights(q, k, scale, start, end);
        let mut pd = p.clone();
        apply_dropout(&mut pd, drop, start);
        let gb = rows_of(g, start, end);
        gemm(true, false, 1.0, &pd, &gb, 1.0, &mut dv);
        let mut dp = Tensor::zeros(end - start, k.rows());
        gemm(false, true, 1.0, &gb, v, 0.0, &mut dp);
        apply_dropout(&mut dp, drop, start);
        for i in 0..dp.rows() {
            let pr = p.row_slice(i);
            let dot: f64 = dp.row_slice(i).iter().zip(pr).map(|(a, b)| a * b).sum();
            for (d, &pv) in dp.row_slice_mut(i).iter_mut().zip(pr) {
                *d = pv * (*d - dot);
            }
        }
        let mut dqb = Tensor::zeros(end - start, q.cols());
        gemm(false, false, scale, &dp, k, 0.0, &mut dqb);
        let c = q.cols();
        dq.data_mut()[start * c..end * c].copy_from_slice(dqb.data());
        gemm(true, false, scale, &dp, &qb, 1.0, &mut dk);
        start = end;
    }
    (dq, dk, dv)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random(rows: usize, cols: usize, seed: u64) -> Tensor {
        let mut rng = rng_for(seed, &[77]);
        let data = (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect();
        Tensor::from_vec(rows, cols, data).unwrap()
    }

    /// Naive softmax(q kᵀ s) v with explicit loops.
    fn naive(q: &Tensor, k: &Tensor, v: &Tensor, s: f64) -> Tensor {
        let n = q.rows();
        let mut out = Tensor::zeros(n, v.cols());
        for i in 0..n {
            let logits: Vec<f64> = (0..k.rows())
                .map(|j| {
                    s * (0..q.cols())
                        .map(|c| q.get(i, c) * k.get(j, c))
                        .sum::<f64>()
                })
                .collect();
            let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = logits.iter().map(|l| (l - m).exp()).sum();
            for (j, l) in logits.iter().enumerate() {
                let w = (l - m).exp() / z;
                for c in 0..v.cols() {
                    let cur = out.get(i, c);
                    out.set(i, c, cur + w * v.get(j, c));
                }
            }
        }
        out
    }

    #[test]
    fn matches_naive_across_block_boundaries() {
        let n = 2 * BLOCK + 5;
        let (q, k, v) = (random(n, 3, 1), random(n, 3, 2), random(n, 4, 3));
        let got = forward(&q, &k, &v, 0.7, None);
        assert!(got.max_abs_diff(&naive(&q, &k, &v, 0.7)) < 1e-12);
    }

    #[test]
    fn weights_rows_sum_to_one() {
        let w = attention_weights(&random(5, 4, 4), &random(5, 4, 5), 0.5);
        for i in 0..5 {
            assert!((w.row_slice(i).iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn gradients_match_finite_differences_across_blocks() {
        let n = BLOCK + 3;
        let ins = [random(n, 2, 6), random(n, 2, 7), random(n, 2, 8)];
        let probe = random(n, 2, 9);
        let drop = Some(AttnDropout { p: 0.25, seed: 11 });
        let loss = |x: &[Tensor]| -> f64 {
            let o = forward(&x[0], &x[1], &x[2], 0.9, drop);
            o.data().iter().zip(probe.data()).map(|(a, b)| a * b).sum()
        };
        let (dq, dk, dv) = backward(&ins[0], &ins[1], &ins[2], 0.9, drop, &probe);
        let analytic = [dq, dk, dv];
        let h = 1e-5;
        for which in 0..3 {
            for idx in [0, 5, 2 * n - 1] {
                let mut plus = ins.to_vec();
                plus[which].data_mut()[idx] += h;
                let mut minus = ins.to_vec();
                minus[which].data_mut()[idx] -= h;
                let fd = (loss(&plus) - loss(&minus)) / (2.0 * h);
                let a = analytic[which].data()[idx];
                assert!(
                    (a - fd).abs() / a.abs().max(fd.abs()).max(1e-6) < 1e-6,
                    "{which} {idx}: {a} vs {fd}"
                );
            }
        }
    }
}
