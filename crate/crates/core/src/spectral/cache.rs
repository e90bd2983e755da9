//! Binary eigendecomposition cache.
//!
//! Layout (little-endian): `n` as `u64`, then `n` eigenvalues as `f64`, then the
//! `n*n` eigenvector entries as `f64` in column-major order. Files are named
//! `<sha256 of the Laplacian>.eig`.

use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use super::{sym_eig, SpectralBasis};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Hex SHA-256 over the matrix size and its row-major little-endian entries.
pub fn cache_key(matrix: &Tensor) -> String {
    let mut h = Sha256::new();
    h.update((matrix.rows() as u64).to_le_bytes());
    h.update((matrix.cols() as u64).to_le_bytes());
    for x in matrix.data() {
        h.update(x.to_le_bytes());
    }
    hex::encode(h.finalize())
}

pub fn write_cache(path: &Path, basis: &SpectralBasis) -> Result<()> {
    let n = basis.len();
    let mut buf = Vec::with_capacity(8 * (1 + n + n * n));
    buf.extend_from_slice(&(n as u64).to_le_bytes());
    for x in basis.eigenvalues() {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    let u = basis.eigenvectors();
    for col in 0..n {
        for row in 0..n {
            buf.extend_from_slice(&u.get(row, col).to_le_bytes());
        }
    }
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn read_cache(path: &Path) -> Result<SpectralBasis> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let corrupt = |msg: &str| Error::Parse {
        path: path.to_path_buf(),
        line: 0,
        msg: msg.into(),
    };
    let head: [u8; 8] = bytes
        .get(..8)
        .and_then(|b| b.try_into().ok())
        .ok_or_else(|| corrupt("truncated header"))?;
    let n = u64::from_le_bytes(head) as usize;
    let expect = n
        .checked_mul(n)
        .and_then(|nn| nn.checked_add(n + 1))
        .and_then(|w| w.checked_mul(8))
        .ok_or_else(|| corrupt("size overflow"))?;
    if bytes.len() != expect {
        return Err(corrupt("length does not match header"));
    }
    let mut words = bytes[8..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")));
    let eigenvalues: Vec<f64> = words.by_ref().take(n).collect();
    let mut u = Tensor::zeros(n, n);
    for col in 0..n {
        for row in 0..n {
            u.set(row, col, words.next().expect("length checked"));
        }
    }
    SpectralBasis::from_parts(eigenvalues, u)
}

/// Decomposes `laplacian`, reusing `<dir>/<key>.eig` when a cache directory is given.
pub fn load_or_compute(laplacian: &Tensor, cache_dir: Option<&Path>) -> Result<SpectralBasis> {
    let Some(dir) = cache_dir else {
        return sym_eig(laplacian);
    };
    let path: PathBuf = dir.join(format!("{}.eig", cache_key(laplacian)));
    if path.exists() {
        match read_cache(&path) {
            Ok(b) if b.len() == laplacian.rows() => return Ok(b),
            Ok(_) | Err(_) => log::warn!("ignoring unusable cache file {}", path.display()),
        }
    }
    let basis = sym_eig(laplacian)?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_cache(&path, &basis)?;
    Ok(basis)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let l = Tensor::from_rows(&[&[1.0, -0.5, -0.5], &[-0.5, 1.0, -0.5], &[-0.5, -0.5, 1.0]]);
        let dir = tempfile::tempdir().unwrap();
        let computed = load_or_compute(&l, Some(dir.path())).unwrap();
        let path = dir.path().join(format!("{}.eig", cache_key(&l)));
        let bytes = fs::read(&path).unwrap();
        assert_eq!(bytes.len(), 8 * (1 + 3 + 9));
        assert_eq!(&bytes[..8], &3u64.to_le_bytes());
        assert_eq!(read_cache(&path).unwrap(), computed);
        assert_eq!(load_or_compute(&l, Some(dir.path())).unwrap(), computed);
    }

    #[test]
    fn key_depends_on_content() {
        assert_ne!(
            cache_key(&Tensor::identity(2)),
            cache_key(&Tensor::zeros(2, 2))
        );
        assert_eq!(cache_key(&Tensor::identity(2)).len(), 64);
    }

    #[test]
    fn truncated_file_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.eig");
        fs::write(&path, 2u64.to_le_bytes()).unwrap();
        assert!(matches!(read_cache(&path), Err(Error::Parse { .. })));
    }
}
