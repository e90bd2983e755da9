//! Cyclic Jacobi eigensolver for dense symmetric matrices.
//!
//! Sweeps use the round-robin (tournament) ordering: each step applies `n/2`
//! disjoint rotations, which commute, so a step is one column pass over the
//! rotated column pairs followed by one pass over every column for the rows.
//! Both passes stream through contiguous memory.

use crate::error::{Error, Result};

pub(crate) const MAX_SWEEPS: usize = 64;
pub(crate) const REL_TOLERANCE: f64 = 1e-11;

struct Rotation {
    p: usize,
    q: usize,
    c: f64,
    s: f64,
}

fn off_diagonal_norm(a: &[f64], n: usize) -> f64 {
    let mut sum = 0.0;
    for j in 0..n {
        for i in 0..n {
            if i != j {
                sum += a[j * n + i] * a[j * n + i];
            }
        }
    }
    sum.sqrt()
}

/// Two distinct mutable columns of a column-major `n×n` buffer.
fn column_pair(buf: &mut [f64], n: usize, p: usize, q: usize) -> (&mut [f64], &mut [f64]) {
    debug_assert!(p < q);
    let (left, right) = buf.split_at_mut(q * n);
    (&mut left[p * n..(p + 1) * n], &mut right[..n])
}

fn rotate_columns(buf: &mut [f64], n: usize, r: &Rotation) {
    let (cp, cq) = column_pair(buf, n, r.p, r.q);
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let (xp, yq) = (*x, *y);
        *x = r.c * xp - r.s * yq;
        *y = r.s * xp + r.c * yq;
    }
}

/// Diagonalizes the symmetric matrix held column-major in `a` (destroyed).
///
/// Returns the diagonal (unsorted eigenvalues) and the column-major matrix of
/// eigenvectors. Converges when the off-diagonal Frobenius norm drops to
/// `1e-11 * ||A||_F`; gives up after 64 sweeps.
pub(crate) fn jacobi_eigen(mut a: Vec<f64>, n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let norm = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let target = REL_TOLERANCE * norm;
    let skip_below = 1e-13 * norm / n.max(1) as f64;

    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    if n < 2 {
        return Ok((a, v));
    }

    // Circle-method schedule over an even number of slots; slot `n` is a bye.
    let slots = n + n % 2;
    let mut order: Vec<usize> = (0..slots).collect();
    let mut rotations = Vec::with_capacity(slots / 2);

    let mut off = off_diagonal_norm(&a, n);
    for _sweep in 0..MAX_SWEEPS {
        if off <= target {
            return Ok(((0..n).map(|i| a[i * n + i]).collect(), v));
        }
        for _step in 0..slots - 1 {
            rotations.clear();
            for k in 0..slots / 2 {
                let (x, y) = (order[k], order[slots - 1 - k]);
                if x >= n || y >= n {
                    continue;
                }
                let (p, q) = if x < y { (x, y) } else { (y, x) };
                let apq = a[q * n + p];
                if apq.abs() <= skip_below {
                    continue;
                }
                let tau = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                rotations.push(Rotation { p, q, c, s: t * c });
            }
            if !rotations.is_empty() {
                for r in &rotations {
                    rotate_columns(&mut a, n, r);
                    rotate_columns(&mut v, n, r);
                }
                for col in a.chunks_exact_mut(n) {
                    for r in &rotations {
                        let (xp, yq) = (col[r.p], col[r.q]);
                        col[r.p] = r.c * xp - r.s * yq;
                        col[r.q] = r.s * xp + r.c * yq;
                    }
                }
                for r in &rotations {
                    a[r.q * n + r.p] = 0.0;
                    a[r.p * n + r.q] = 0.0;
                }
            }
            order[1..].rotate_right(1);
        }
        // Row and column passes round differently; keep the iterate symmetric.
        for j in 0..n {
            for i in (j + 1)..n {
                let m = 0.5 * (a[j * n + i] + a[i * n + j]);
                a[j * n + i] = m;
                a[i * n + j] = m;
            }
        }
        off = off_diagonal_norm(&a, n);
    }
    if off <= target {
        return Ok(((0..n).map(|i| a[i * n + i]).collect(), v));
    }
    Err(Error::NoConvergence {
        sweeps: MAX_SWEEPS,
        off,
    })
}
