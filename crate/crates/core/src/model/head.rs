//! Eigenvalue decoder and the spectral convolution head.

use std::sync::Arc;

use crate::autodiff::{Binding, Tape, Var};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

use super::layer::linear;
use super::ModelConfig;

/// Per-token MLP `d → d → M` producing the raw filter channels.
pub fn decode_eigenvalues(tape: &mut Tape, params: &Binding, z: Var) -> Result<Var> {
    let h = linear(tape, z, params.var("decoder.w1"), params.var("decoder.b1"))?;
    let h = tape.gelu(h)?;
    linear(tape, h, params.var("decoder.w2"), params.var("decoder.b2"))
}

/// Replaces channel 0 with the all-ones identity filter.
pub fn with_identity_channel(tape: &mut Tape, gamma: Var) -> Result<Var> {
    let [n, m] = tape.value(gamma).shape();
    let ones = tape.constant(Tensor::filled(n, 1, 1.0));
    if m == 1 {
        return Ok(ones);
    }
    let learned = tape.slice_cols(gamma, 1, m - 1)?;
    tape.concat_cols(&[ones, learned])
}

/// `Σ_m U diag(γ[:, m]) Uᵀ h · W_m`, evaluated as `U (Σ_m (γ[:, m] ⊙ Uᵀh) W_m)`.
pub fn filtered_sum(
    tape: &mut Tape,
    u: &Arc<Tensor>,
    h: Var,
    gamma: Var,
    mixers: &[Var],
) -> Result<Var> {
    let m = tape.value(gamma).cols();
    if mixers.len() != m || m == 0 {
        return Err(Error::ShapeMismatch(format!(
            "{} channel mixers for {m} filter channels",
            mixers.len()
        )));
    }
    let projected = tape.basis_mul(u, h, true)?;
    let mut acc: Option<Var> = None;
    for (c, &w) in mixers.iter().enumerate() {
        let g = tape.slice_cols(gamma, c, 1)?;
        let scaled = tape.mul_col(projected, g)?;
        let mixed = tape.matmul(scaled, w)?;
        acc = Some(match acc {
            None => mixed,
            Some(a) => tape.add(a, mixed)?,
        });
    }
    tape.basis_mul(u, acc.expect("at least one channel"), false)
}

/// `logits = (H0 + Σ_m H_m) W_out + b_out` with `H0 = act(X W_in + b_in)`.
/// `gamma` must already carry the identity channel in column 0.
pub fn spectral_conv_head(
    tape: &mut Tape,
    params: &Binding,
    config: &ModelConfig,
    u: &Arc<Tensor>,
    gamma: Var,
    x: Var,
) -> Result<Var> {
    let h0 = linear(tape, x, params.var("head.w_in"), params.var("head.b_in"))?;
    let h0 = config.activation.apply(tape, h0)?;
    let mixers: Vec<Var> = (0..config.channels)
        .map(|m| params.var(&format!("head.mix{m}")))
        .collect();
    let filtered = filtered_sum(tape, u, h0, gamma, &mixers)?;
    let h = tape.add(h0, filtered)?;
    linear(tape, h, params.var("head.w_out"), params.var("head.b_out"))
}
