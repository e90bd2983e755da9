//! Client sampling, FedAvg and communication accounting.

use rand::seq::index;

use crate::autodiff::ParamSet;
use crate::error::{Error, Result};
use crate::model::ModelState;
use crate::rng::{rng_for, stream};

/// Participants per round: `max(1, ceil(K·m))`.
pub fn participants_per_round(m: usize, fraction_fit: f64) -> usize {
    // The slack absorbs products such as 0.6 * 5 = 3.0000000000000004.
    let k = (fraction_fit * m as f64 - 1e-9).ceil().max(1.0) as usize;
    k.min(m)
}

/// Ascending ids of the clients taking part in `round`.
pub fn sample_clients(m: usize, fraction_fit: f64, round: usize, seed: u64) -> Vec<usize> {
    let k = participants_per_round(m, fraction_fit);
    if k == m {
        return (0..m).collect();
    }
    let mut rng = rng_for(seed, &[stream::SAMPLE, round as u64]);
    let mut picked = index::sample(&mut rng, m, k).into_vec();
    picked.sort_unstable();
    picked
}

/// Weighted mean of parameter sets with weights normalized to sum to one.
///
/// Evaluated as `θ_0 + Σ_i w_i (θ_i − θ_0)` and clamped to the elementwise
/// range of the inputs, so a single set or identical sets come back unchanged.
pub fn fedavg(sets: &[&ParamSet], weights: &[f64]) -> Result<ParamSet> {
    let Some(first) = sets.first() else {
        return Err(Error::Empty("no parameter sets to aggregate".into()));
    };
    if weights.len() != sets.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} weights for {} parameter sets",
            weights.len(),
            sets.len()
        )));
    }
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::InvalidConfig(format!(
            "aggregation weights {weights:?}"
        )));
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(Error::InvalidConfig(
            "aggregation weights are all zero".into(),
        ));
    }
    if let Some(i) = sets.iter().position(|s| !s.same_layout(first)) {
        return Err(Error::ShapeMismatch(format!(
            "parameter set {i} has a different layout"
        )));
    }
    let base = first.flatten();
    let flats: Vec<Vec<f64>> = sets.iter().map(|s| s.flatten()).collect();
    let mut out = base.clone();
    for (flat, w) in flats.iter().zip(weights).skip(1) {
        let w = w / total;
        for ((o, x), b) in out.iter_mut().zip(flat).zip(&base) {
            *o += w * (x - b);
        }
    }
    for (i, o) in out.iter_mut().enumerate() {
        let (lo, hi) = flats
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), f| {
                (lo.min(f[i]), hi.max(f[i]))
            });
        *o = o.clamp(lo, hi);
    }
    first.unflatten(&out)
}

/// Parameter count and 32-bit wire size.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CommStats {
    pub params: usize,
    pub bytes: usize,
}

pub const WIRE_BYTES_PER_PARAM: usize = 4;

pub fn comm_for_count(params: usize) -> CommStats {
    CommStats {
        params,
        bytes: WIRE_BYTES_PER_PARAM * params,
    }
}

pub fn comm_accounting(state: &ModelState) -> CommStats {
    comm_for_count(state.param_count())
}

/// Bytes moved in one round: a download and an upload per participant.
pub fn round_bytes(participants: usize, params: usize) -> usize {
    2 * participants * comm_for_count(params).bytes
}
