//! Symmetric eigendecomposition and spectral reconstruction.

mod cache;
mod jacobi;

pub use cache::{cache_key, load_or_compute, read_cache, write_cache};

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::tensor::{gemm, Tensor};

/// Eigenpairs of a real symmetric matrix.
///
/// Eigenvalues ascend; column `k` of `eigenvectors` pairs with eigenvalue `k`.
/// Each eigenvector's largest-magnitude component is positive (lowest index
/// wins ties), which makes the decomposition deterministic up to rotations
/// inside repeated eigenspaces.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralBasis {
    eigenvalues: Vec<f64>,
    eigenvectors: Arc<Tensor>,
}

impl SpectralBasis {
    pub fn from_parts(eigenvalues: Vec<f64>, eigenvectors: Tensor) -> Result<Self> {
        let n = eigenvalues.len();
        if eigenvectors.shape() != [n, n] {
            return Err(Error::ShapeMismatch(format!(
                "{n} eigenvalues with a {}x{} eigenvector matrix",
                eigenvectors.rows(),
                eigenvectors.cols()
            )));
        }
        Ok(SpectralBasis {
            eigenvalues,
            eigenvectors: Arc::new(eigenvectors),
        })
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &Tensor {
        &self.eigenvectors
    }

    /// Shared handle to the eigenvector matrix; clones are cheap.
    pub fn shared_eigenvectors(&self) -> Arc<Tensor> {
        Arc::clone(&self.eigenvectors)
    }

    /// `max |U^T U - I|`
    pub fn orthonormality_error(&self) -> f64 {
        let n = self.len();
        let mut gram = Tensor::zeros(n, n);
        gemm(
            true,
            false,
            1.0,
            &self.eigenvectors,
            &self.eigenvectors,
            0.0,
            &mut gram,
        );
        gram.max_abs_diff(&Tensor::identity(n))
    }

    /// `||U diag(gamma) U^T - m||_F / ||m||_F` (absolute when `m` is zero).
    pub fn reconstruction_error(&self, m: &Tensor) -> f64 {
        let rebuilt = reconstruct_basis(self, &self.eigenvalues).expect("matching length");
        let diff = rebuilt.zip_map(m, |a, b| a - b).frobenius_norm();
        let norm = m.frobenius_norm();
        if norm > 0.0 {
            diff / norm
        } else {
            diff
        }
    }
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
pub fn sym_eig(matrix: &Tensor) -> Result<SpectralBasis> {
    let n = matrix.rows();
    if matrix.cols() != n {
        return Err(Error::ShapeMismatch(format!(
            "eigendecomposition needs a square matrix, got {}x{}",
            n,
            matrix.cols()
        )));
    }
    if !matrix.all_finite() {
        return Err(Error::NonFinite("eigensolver input".into()));
    }
    let mut asym = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            asym = asym.max((matrix.get(i, j) - matrix.get(j, i)).abs());
        }
    }
    if asym > 1e-12 {
        return Err(Error::NotSymmetric(asym));
    }

    // Symmetric, so the row-major buffer doubles as column-major.
    let mut work = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            work[j * n + i] = 0.5 * (matrix.get(i, j) + matrix.get(j, i));
        }
    }
    let (diag, vecs) = jacobi::jacobi_eigen(work, n)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| diag[a].total_cmp(&diag[b]).then(a.cmp(&b)));
    let eigenvalues: Vec<f64> = order.iter().map(|&k| diag[k]).collect();
    let mut eigenvectors = Tensor::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let col = &vecs[src * n..(src + 1) * n];
        let mut lead = 0;
        for (i, x) in col.iter().enumerate() {
            if x.abs() > col[lead].abs() {
                lead = i;
            }
        }
        let sign = if col[lead] < 0.0 { -1.0 } else { 1.0 };
        for (i, x) in col.iter().enumerate() {
            eigenvectors.set(i, dst, sign * x);
        }
    }
    Ok(SpectralBasis {
        eigenvalues,
        eigenvectors: Arc::new(eigenvectors),
    })
}

/// `U diag(new_eigenvalues) U^T`, symmetrized.
pub fn reconstruct_basis(basis: &SpectralBasis, new_eigenvalues: &[f64]) -> Result<Tensor> {
    let n = basis.len();
    if new_eigenvalues.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "{} new eigenvalues for a basis of size {n}",
            new_eigenvalues.len()
        )));
    }
    let u = &basis.eigenvectors;
    let mut scaled = Tensor::clone(u);
    for i in 0..n {
        for (x, g) in scaled.row_slice_mut(i).iter_mut().zip(new_eigenvalues) {
            *x *= g;
        }
    }
    let mut out = Tensor::zeros(n, n);
    gemm(false, true, 1.0, &scaled, u, 0.0, &mut out);
    for i in 0..n {
        for j in (i + 1)..n {
            let m = 0.5 * (out.get(i, j) + out.get(j, i));
            out.set(i, j, m);
            out.set(j, i, m);
        }
    }
    Ok(out)
}
