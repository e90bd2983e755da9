//! The GNODEFormer model.
//!
//! Pipeline: eigenvalue encoding, input projection, `layers` Runge-Kutta
//! transformer blocks joined by a normalized residual history, an eigenvalue
//! decoder producing filter channels, and a spectral convolution head over the
//! node features.

mod encoding;
mod head;
mod layer;
mod ode;

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::Rng as _;

pub use encoding::eigen_encode;
pub use head::{decode_eigenvalues, filtered_sum, spectral_conv_head, with_identity_channel};
pub use layer::{multi_head_attention, residual_history_update, transformer_layer_f};
pub use ode::{rk_block, rk_increment, RkOrder, StageWeights, Tableau};

use crate::autodiff::{Binding, ParamSet, Tape, Var};
use crate::error::{Error, Result};
use crate::graph::GraphDataset;
use crate::rng::{rng_for, stream};
use crate::spectral::SpectralBasis;
use crate::tensor::Tensor;

pub(crate) const LN_EPS: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Gelu,
    Tanh,
}

impl Activation {
    pub fn apply(self, tape: &mut Tape, x: Var) -> Result<Var> {
        match self {
            Activation::Relu => tape.relu(x),
            Activation::Gelu => tape.gelu(x),
            Activation::Tanh => tape.tanh(x),
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Activation::Relu => "relu",
            Activation::Gelu => "gelu",
            Activation::Tanh => "tanh",
        })
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "relu" => Ok(Activation::Relu),
            "gelu" => Ok(Activation::Gelu),
            "tanh" => Ok(Activation::Tanh),
            other => Err(Error::InvalidConfig(format!(
                "unknown activation {other:?}"
            ))),
        }
    }
}

/// Model hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    /// Encoding and transformer width `d`.
    pub width: usize,
    pub heads: usize,
    pub layers: usize,
    pub rk_order: RkOrder,
    /// Eigenvalue encoding scale.
    pub epsilon: f64,
    /// Hidden width of the convolution head.
    pub hidden: usize,
    /// Filter channels `M`, channel 0 being the identity filter.
    pub channels: usize,
    pub num_features: usize,
    pub num_classes: usize,
    pub dropout: f64,
    pub activation: Activation,
    /// Train the Runge-Kutta combination weights; frozen at the classical values otherwise.
    pub learn_rk_weights: bool,
}

impl ModelConfig {
    pub fn new(num_features: usize, num_classes: usize) -> Self {
        let heads = 4;
        ModelConfig {
            width: 32,
            heads,
            layers: 2,
            rk_order: RkOrder::Rk2,
            epsilon: 100.0,
            hidden: 32,
            channels: heads + 1,
            num_features,
            num_classes,
            dropout: 0.0,
            activation: Activation::Gelu,
            learn_rk_weights: true,
        }
    }

    /// Defaults sized for `dataset`.
    pub fn for_dataset(dataset: &GraphDataset) -> Self {
        ModelConfig::new(dataset.num_features(), dataset.num_classes())
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidConfig(msg));
        if self.width == 0 || !self.width.is_multiple_of(2) {
            return fail(format!(
                "width must be even and positive, got {}",
                self.width
            ));
        }
        if self.heads == 0 || !self.width.is_multiple_of(self.heads) {
            return fail(format!(
                "{} heads do not divide width {}",
                self.heads, self.width
            ));
        }
        if self.channels == 0 {
            return fail("at least one filter channel is required".into());
        }
        if self.hidden == 0 || self.num_features == 0 || self.num_classes == 0 {
            return fail("hidden width, feature count and class count must be positive".into());
        }
        if !self.epsilon.is_finite() {
            return fail(format!("epsilon {} is not finite", self.epsilon));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return fail(format!("dropout {} outside [0, 1)", self.dropout));
        }
        Ok(())
    }

    fn tableau(&self) -> Tableau {
        Tableau::classical(self.rk_order)
    }

    /// Parameter names and shapes in canonical order.
    pub fn param_shapes(&self) -> Vec<(String, [usize; 2])> {
        let (d, dh) = (self.width, self.width / self.heads.max(1));
        let mut out: Vec<(String, [usize; 2])> = Vec::new();
        let mut push = |name: String, shape: [usize; 2]| out.push((name, shape));
        push("encoder.w".into(), [d + 1, d]);
        push("encoder.b".into(), [1, d]);
        for l in 0..self.layers {
            push(format!("layer{l}.ln1.g"), [1, d]);
            push(format!("layer{l}.ln1.b"), [1, d]);
            for h in 0..self.heads {
                push(format!("layer{l}.attn.q{h}"), [d, dh]);
                push(format!("layer{l}.attn.k{h}"), [d, dh]);
                push(format!("layer{l}.attn.v{h}"), [d, dh]);
            }
            push(format!("layer{l}.attn.o"), [dh * self.heads, d]);
            push(format!("layer{l}.attn.o_b"), [1, d]);
            push(format!("layer{l}.ln2.g"), [1, d]);
            push(format!("layer{l}.ln2.b"), [1, d]);
            push(format!("layer{l}.ffn.w1"), [d, d]);
            push(format!("layer{l}.ffn.b1"), [1, d]);
            push(format!("layer{l}.ffn.w2"), [d, d]);
            push(format!("layer{l}.ffn.b2"), [1, d]);
            if self.learn_rk_weights {
                push(format!("layer{l}.rk_w"), [1, self.rk_order.stages()]);
            }
        }
        for l in 0..=self.layers {
            push(format!("history{l}.g"), [1, d]);
            push(format!("history{l}.b"), [1, d]);
        }
        push("decoder.w1".into(), [d, d]);
        push("decoder.b1".into(), [1, d]);
        push("decoder.w2".into(), [d, self.channels]);
        push("decoder.b2".into(), [1, self.channels]);
        push("head.w_in".into(), [self.num_features, self.hidden]);
        push("head.b_in".into(), [1, self.hidden]);
        for m in 0..self.channels {
            push(format!("head.mix{m}"), [self.hidden, self.hidden]);
        }
        push("head.w_out".into(), [self.hidden, self.num_classes]);
        push("head.b_out".into(), [1, self.num_classes]);
        out
    }

    pub fn param_count(&self) -> usize {
        self.param_shapes().iter().map(|(_, [r, c])| r * c).sum()
    }
}

/// Configuration plus learned parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    pub config: ModelConfig,
    pub params: ParamSet,
}

/// Tape handles produced by [`forward`].
#[derive(Debug, Clone, Copy)]
pub struct ForwardOutput {
    /// `n×C` class scores.
    pub logits: Var,
    /// `n×M` filter channels as used by the head (column 0 all ones).
    pub gamma: Var,
}

impl ModelState {
    /// Glorot-uniform weights, zero biases, unit layer-norm gains and the
    /// classical Runge-Kutta weights.
    pub fn init(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let rk = config.tableau().weights;
        let mut params = ParamSet::new();
        for (idx, (name, [r, c])) in config.param_shapes().into_iter().enumerate() {
            let value = if name.ends_with(".rk_w") {
                Tensor::row(&rk)
            } else if name.ends_with(".g") {
                Tensor::filled(r, c, 1.0)
            } else if r == 1 {
                Tensor::zeros(r, c)
            } else {
                let bound = (6.0 / (r + c) as f64).sqrt();
                let mut rng = rng_for(seed, &[stream::INIT, idx as u64]);
                let data = (0..r * c).map(|_| rng.gen_range(-bound..bound)).collect();
                Tensor::from_vec(r, c, data)?
            };
            params.insert(name, value)?;
        }
        Ok(ModelState { config, params })
    }

    /// Wraps existing parameters after checking them against `config`.
    pub fn from_params(config: ModelConfig, params: ParamSet) -> Result<Self> {
        config.validate()?;
        let shapes = config.param_shapes();
        let matches = shapes.len() == params.len()
            && shapes
                .iter()
                .zip(params.iter())
                .all(|((n1, s), (n2, t))| n1 == n2 && *s == t.shape());
        if !matches {
            return Err(Error::ShapeMismatch(
                "parameters do not match the model configuration".into(),
            ));
        }
        Ok(ModelState { config, params })
    }

    pub fn param_count(&self) -> usize {
        self.params.num_scalars()
    }

    /// Evaluation-mode logits and filter channels as plain tensors.
    pub fn predict(&self, basis: &SpectralBasis, features: &Tensor) -> Result<(Tensor, Tensor)> {
        let mut tape = Tape::eval();
        let binding = self.params.bind(&mut tape);
        let x = tape.constant(features.clone());
        let out = forward(&mut tape, &binding, &self.config, basis, x, 0)?;
        Ok((
            tape.value(out.logits).clone(),
            tape.value(out.gamma).clone(),
        ))
    }
}

/// Records the full model on `tape`. Dropout is active only on a training
/// tape and draws its masks from `seed`.
pub fn forward(
    tape: &mut Tape,
    params: &Binding,
    config: &ModelConfig,
    basis: &SpectralBasis,
    features: Var,
    seed: u64,
) -> Result<ForwardOutput> {
    config.validate()?;
    let n = basis.len();
    let fshape = tape.value(features).shape();
    if fshape != [n, config.num_features] {
        return Err(Error::ShapeMismatch(format!(
            "features {}x{} for {n} nodes and {} configured features",
            fshape[0], fshape[1], config.num_features
        )));
    }
    let encoded = tape.constant(eigen_encode(
        basis.eigenvalues(),
        config.width,
        config.epsilon,
    ));
    let mut raw = layer::linear(
        tape,
        encoded,
        params.var("encoder.w"),
        params.var("encoder.b"),
    )?;
    let tableau = config.tableau();
    let norm = |tape: &mut Tape, x: Var, l: usize| {
        layer::affine_norm(
            tape,
            x,
            params.var(&format!("history{l}.g")),
            params.var(&format!("history{l}.b")),
        )
    };
    let mut z = norm(tape, raw, 0)?;
    for l in 0..config.layers {
        let weights = if config.learn_rk_weights {
            StageWeights::Learned(params.var(&format!("layer{l}.rk_w")))
        } else {
            StageWeights::Fixed
        };
        let inc = rk_increment(tape, z, &tableau, weights, |t, v| {
            transformer_layer_f(t, params, config, l, v, seed)
        })?;
        let (next_raw, next_z) = residual_history_update(
            tape,
            raw,
            inc,
            params.var(&format!("history{}.g", l + 1)),
            params.var(&format!("history{}.b", l + 1)),
        )?;
        raw = next_raw;
        z = next_z;
    }
    let decoded = decode_eigenvalues(tape, params, z)?;
    let gamma = with_identity_channel(tape, decoded)?;
    let u = basis.shared_eigenvectors();
    let logits = spectral_conv_head(tape, params, config, &u, gamma, features)?;
    Ok(ForwardOutput { logits, gamma })
}

/// Mean masked cross-entropy (on the tape) and masked accuracy.
pub fn loss_and_metrics(
    tape: &mut Tape,
    logits: Var,
    labels: &[usize],
    mask: &[bool],
) -> Result<(Var, f64)> {
    let loss = tape.masked_cross_entropy(logits, labels, mask)?;
    let acc = accuracy(tape.value(logits), labels, mask)?;
    Ok((loss, acc))
}

/// Fraction of masked rows whose arg-max (first on ties) equals the label.
pub fn accuracy(logits: &Tensor, labels: &[usize], mask: &[bool]) -> Result<f64> {
    if labels.len() != logits.rows() || mask.len() != logits.rows() {
        return Err(Error::ShapeMismatch(format!(
            "{} labels and {} mask entries for {} rows",
            labels.len(),
            mask.len(),
            logits.rows()
        )));
    }
    let mut total = 0usize;
    let mut hits = 0usize;
    for i in (0..logits.rows()).filter(|&i| mask[i]) {
        total += 1;
        let row = logits.row_slice(i);
        let best = (0..row.len()).fold(0, |b, j| if row[j] > row[b] { j } else { b });
        if best == labels[i] {
            hits += 1;
        }
    }
    if total == 0 {
        return Err(Error::Empty("accuracy over an empty mask".into()));
    }
    Ok(hits as f64 / total as f64)
}

/// Text table of `(channel, index, gamma_original, gamma_new)` rows.
pub fn filter_table(eigenvalues: &[f64], gamma: &Tensor) -> Result<String> {
    if gamma.rows() != eigenvalues.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} filter rows for {} eigenvalues",
            gamma.rows(),
            eigenvalues.len()
        )));
    }
    let mut out = String::from("channel index gamma_original gamma_new\n");
    for m in 0..gamma.cols() {
        for (k, g) in eigenvalues.iter().enumerate() {
            out.push_str(&format!("{m} {k} {g:?} {:?}\n", gamma.get(k, m)));
        }
    }
    Ok(out)
}

pub fn write_filter_table(path: &Path, eigenvalues: &[f64], gamma: &Tensor) -> Result<()> {
    fs::write(path, filter_table(eigenvalues, gamma)?).map_err(|e| Error::io(path, e))
}
