use crate::tensor::Tensor;

/// Sinusoidal eigenvalue encoding.
///
/// Row `k` is `[γ_k, sin(εγ_k/10000^{0/d}), cos(εγ_k/10000^{0/d}), sin(εγ_k/10000^{2/d}), …]`:
/// column 0 carries the raw eigenvalue and columns `1 + 2i`, `2 + 2i` hold the
/// sine and cosine at frequency `ε / 10000^{2i/d}` for `i in 0..d/2`.
/// `width` (d) must be even.
pub fn eigen_encode(eigenvalues: &[f64], width: usize, epsilon: f64) -> Tensor {
    debug_assert!(width.is_multiple_of(2));
    let freqs: Vec<f64> = (0..width / 2)
        .map(|i| epsilon / 10000f64.powf(2.0 * i as f64 / width as f64))
        .collect();
    let mut out = Tensor::zeros(eigenvalues.len(), width + 1);
    for (k, &g) in eigenvalues.iter().enumerate() {
        let row = out.row_slice_mut(k);
        row[0] = g;
        for (i, f) in freqs.iter().enumerate() {
            let angle = f * g;
            row[1 + 2 * i] = angle.sin();
            row[2 + 2 * i] = angle.cos();
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_eigenvalue_row() {
        let e = eigen_encode(&[0.0], 6, 100.0);
        assert_eq!(e.row_slice(0), &[0.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0]);
    }

    #[test]
    fn explicit_entries() {
        // d = 4: frequencies 100 / 10000^0 = 100 and 100 / 10000^(1/2) = 1.
        let e = eigen_encode(&[2.0], 4, 100.0);
        let want = [2.0, 200f64.sin(), 200f64.cos(), 2f64.sin(), 2f64.cos()];
        for (a, b) in e.row_slice(0).iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
        // sin(200) = -sin(200 - 63*pi) = -sin(2.07966...) = -0.8732973...
        assert!((e.get(0, 1) - (-0.873_297_297_213_995)).abs() < 1e-12);
    }

    #[test]
    fn first_sine_column_separates_close_eigenvalues() {
        // With eps * |g1 - g2| < pi and both angles in (-pi/2, pi/2) the first
        // sine is strictly monotone.
        let eps = 1.0;
        let gs = [0.0, 0.3, 0.9, 1.5];
        let e = eigen_encode(&gs, 8, eps);
        for w in 0..gs.len() - 1 {
            assert!(e.get(w, 1) < e.get(w + 1, 1));
            assert_ne!(e.row_slice(w), e.row_slice(w + 1));
        }
    }
}
