//! Transformer layer function and residual layer history.

use crate::autodiff::{Binding, Tape, Var};
use crate::error::Result;

use super::{ModelConfig, LN_EPS};

/// Layer norm over rows followed by a per-column gain and bias.
pub(crate) fn affine_norm(tape: &mut Tape, x: Var, gain: Var, bias: Var) -> Result<Var> {
    let y = tape.layer_norm_rows(x, LN_EPS)?;
    let y = tape.mul_row(y, gain)?;
    tape.add_row(y, bias)
}

/// `x·w + b`
pub(crate) fn linear(tape: &mut Tape, x: Var, w: Var, b: Var) -> Result<Var> {
    let y = tape.matmul(x, w)?;
    tape.add_row(y, b)
}

/// Multi-head self-attention over all eigen-tokens (no masking).
pub fn multi_head_attention(
    tape: &mut Tape,
    params: &Binding,
    config: &ModelConfig,
    layer: usize,
    x: Var,
    seed: u64,
) -> Result<Var> {
    let dh = config.width / config.heads;
    let scale = 1.0 / (dh as f64).sqrt();
    let mut heads = Vec::with_capacity(config.heads);
    for h in 0..config.heads {
        let q = tape.matmul(x, params.var(&format!("layer{layer}.attn.q{h}")))?;
        let k = tape.matmul(x, params.var(&format!("layer{layer}.attn.k{h}")))?;
        let v = tape.matmul(x, params.var(&format!("layer{layer}.attn.v{h}")))?;
        heads.push(tape.attention(q, k, v, scale, config.dropout, seed)?);
    }
    let joined = if heads.len() == 1 {
        heads[0]
    } else {
        tape.concat_cols(&heads)?
    };
    linear(
        tape,
        joined,
        params.var(&format!("layer{layer}.attn.o")),
        params.var(&format!("layer{layer}.attn.o_b")),
    )
}

/// The ODE right-hand side `f(z) = a + FFN(LN2(z + a))` with `a = MHA(LN1(z))`,
/// that is, the increment of a pre-norm transformer encoder layer.
pub fn transformer_layer_f(
    tape: &mut Tape,
    params: &Binding,
    config: &ModelConfig,
    layer: usize,
    z: Var,
    seed: u64,
) -> Result<Var> {
    let p = |name: &str| params.var(&format!("layer{layer}.{name}"));
    let n1 = affine_norm(tape, z, p("ln1.g"), p("ln1.b"))?;
    let a = multi_head_attention(tape, params, config, layer, n1, seed)?;
    let mid = tape.add(z, a)?;
    let n2 = affine_norm(tape, mid, p("ln2.g"), p("ln2.b"))?;
    let h = linear(tape, n2, p("ffn.w1"), p("ffn.b1"))?;
    let h = tape.gelu(h)?;
    let h = linear(tape, h, p("ffn.w2"), p("ffn.b2"))?;
    let h = tape.dropout(h, config.dropout, seed)?;
    tape.add(a, h)
}

/// Adds the block increment to the raw running sum and normalizes it.
/// Returns `(raw, normalized)`; the raw sum is the state carried forward.
pub fn residual_history_update(
    tape: &mut Tape,
    x_prev: Var,
    y_prev: Var,
    gain: Var,
    bias: Var,
) -> Result<(Var, Var)> {
    let raw = tape.add(x_prev, y_prev)?;
    let normalized = affine_norm(tape, raw, gain, bias)?;
    Ok((raw, normalized))
}
