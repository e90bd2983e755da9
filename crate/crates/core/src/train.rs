//! Full-graph training with Adam and early stopping on validation accuracy.

use crate::autodiff::{adam_step, backward, AdamConfig, OptimizerState, Tape};
use crate::error::{Error, Result};
use crate::graph::GraphDataset;
use crate::model::{forward, loss_and_metrics, ModelConfig, ModelState};
use crate::rng::derive_seed;
use crate::spectral::SpectralBasis;
use crate::tensor::Tensor;
use crate::util::Stopwatch;

/// Dropout seed for one epoch of one client. Centralized training is client 0.
pub fn epoch_seed(seed: u64, client: usize, epoch: usize) -> u64 {
    derive_seed(seed, &[client as u64, epoch as u64])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepMetrics {
    pub loss: f64,
    pub accuracy: f64,
}

/// One forward/backward/update pass over the whole graph on `mask`.
/// Metrics come from the forward pass before the update.
pub fn train_step(
    state: &mut ModelState,
    optimizer: &mut OptimizerState,
    basis: &SpectralBasis,
    features: &Tensor,
    labels: &[usize],
    mask: &[bool],
    seed: u64,
) -> Result<StepMetrics> {
    let mut tape = Tape::new();
    let bind = state.params.bind(&mut tape);
    let x = tape.constant(features.clone());
    let out = forward(&mut tape, &bind, &state.config, basis, x, seed)?;
    let (loss, accuracy) = loss_and_metrics(&mut tape, out.logits, labels, mask)?;
    let loss_value = tape.value(loss).item();
    let grads = backward(&tape, loss, &bind)?;
    drop(tape);
    adam_step(&mut state.params, &grads, optimizer)?;
    Ok(StepMetrics {
        loss: loss_value,
        accuracy,
    })
}

/// Evaluation-mode accuracy on each mask; `None` for an empty mask.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub train: Option<f64>,
    pub val: Option<f64>,
    pub test: Option<f64>,
}

pub fn evaluate(
    state: &ModelState,
    basis: &SpectralBasis,
    dataset: &GraphDataset,
) -> Result<Evaluation> {
    let (logits, _) = state.predict(basis, dataset.features())?;
    let acc = |mask: &[bool]| -> Result<Option<f64>> {
        if mask.iter().any(|&m| m) {
            crate::model::accuracy(&logits, dataset.labels(), mask).map(Some)
        } else {
            Ok(None)
        }
    };
    let m = dataset.masks();
    Ok(Evaluation {
        train: acc(&m.train)?,
        val: acc(&m.val)?,
        test: acc(&m.test)?,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Stop after this many epochs without a validation improvement.
    pub patience: Option<usize>,
    /// Return the parameters of the best validation epoch instead of the last.
    pub restore_best: bool,
    pub adam: AdamConfig,
    /// Seeds initialization (when the trainer creates the model) and dropout.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 200,
            patience: Some(50),
            restore_best: true,
            adam: AdamConfig::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Training loss and accuracy from the forward pass of this epoch.
    pub loss: f64,
    pub train_accuracy: f64,
    /// Evaluation-mode accuracies after the update.
    pub val_accuracy: Option<f64>,
    pub test_accuracy: Option<f64>,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub state: ModelState,
    pub history: Vec<EpochRecord>,
    /// Epoch whose parameters `state` holds (`None` when no epoch ran).
    pub selected_epoch: Option<usize>,
    /// Evaluation of `state`.
    pub evaluation: Evaluation,
}

/// Trains a freshly initialized model on `dataset`'s train mask.
pub fn train_centralized(
    dataset: &GraphDataset,
    basis: &SpectralBasis,
    model: ModelConfig,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    let state = ModelState::init(model, config.seed)?;
    train_from(state, dataset, basis, config)
}

/// Continues training `state`; early stopping watches validation accuracy
/// when the validation mask is non-empty.
pub fn train_from(
    mut state: ModelState,
    dataset: &GraphDataset,
    basis: &SpectralBasis,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    config.adam.validate()?;
    if basis.len() != dataset.num_nodes() {
        return Err(Error::ShapeMismatch(format!(
            "basis of size {} for {} nodes",
            basis.len(),
            dataset.num_nodes()
        )));
    }
    let masks = dataset.masks();
    if !masks.train.iter().any(|&m| m) {
        return Err(Error::Empty("training mask".into()));
    }
    let mut optimizer = OptimizerState::new(&state.params, config.adam);
    let mut history = Vec::with_capacity(config.epochs);
    let mut best: Option<(f64, usize, ModelState)> = None;
    for epoch in 0..config.epochs {
        let watch = Stopwatch::start();
        let step = train_step(
            &mut state,
            &mut optimizer,
            basis,
            dataset.features(),
            dataset.labels(),
            &masks.train,
            epoch_seed(config.seed, 0, epoch),
        )?;
        let seconds = watch.seconds();
        let eval = evaluate(&state, basis, dataset)?;
        history.push(EpochRecord {
            epoch,
            loss: step.loss,
            train_accuracy: step.accuracy,
            val_accuracy: eval.val,
            test_accuracy: eval.test,
            seconds,
        });
        log::debug!(
            "epoch {epoch}: loss {:.4} train {:.3} val {:?}",
            step.loss,
            step.accuracy,
            eval.val
        );
        if let Some(val) = eval.val {
            if best.as_ref().is_none_or(|(b, _, _)| val > *b) {
                best = Some((val, epoch, state.clone()));
            }
            if let (Some(patience), Some((_, at, _))) = (config.patience, &best) {
                if epoch - at >= patience {
                    log::info!("early stop at epoch {epoch}, best epoch {at}");
                    break;
                }
            }
        }
    }
    let last = history.last().map(|r| r.epoch);
    let (state, selected_epoch) = match best {
        Some((_, at, best_state)) if config.restore_best => (best_state, Some(at)),
        _ => (state, last),
    };
    let evaluation = evaluate(&state, basis, dataset)?;
    Ok(TrainOutcome {
        state,
        history,
        selected_epoch,
        evaluation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate_sbm, SbmSpec};
    use crate::spectral::sym_eig;

    fn setup() -> (GraphDataset, SpectralBasis, ModelConfig) {
        let ds = generate_sbm(&SbmSpec {
            block_sizes: vec![20, 20, 20],
            p_in: 0.3,
            p_out: 0.02,
            num_features: 8,
            signal: 1.0,
            seed: 3,
        })
        .unwrap();
        let basis = sym_eig(&ds.normalized_laplacian()).unwrap();
        let cfg = ModelConfig {
            width: 8,
            heads: 2,
            layers: 1,
            hidden: 8,
            channels: 3,
            ..ModelConfig::for_dataset(&ds)
        };
        (ds, basis, cfg)
    }

    #[test]
    fn zero_epochs_returns_initial_model() {
        let (ds, basis, cfg) = setup();
        let tc = TrainConfig {
            epochs: 0,
            ..TrainConfig::default()
        };
        let out = train_centralized(&ds, &basis, cfg.clone(), &tc).unwrap();
        assert!(out.history.is_empty());
        assert_eq!(out.selected_epoch, None);
        assert_eq!(out.state, ModelState::init(cfg, 0).unwrap());
    }

    #[test]
    fn loss_decreases_and_runs_are_bit_identical() {
        let (ds, basis, cfg) = setup();
        let tc = TrainConfig {
            epochs: 30,
            patience: None,
            restore_best: false,
            adam: AdamConfig {
                lr: 0.01,
                ..AdamConfig::default()
            },
            seed: 4,
        };
        let a = train_centralized(&ds, &basis, cfg.clone(), &tc).unwrap();
        let b = train_centralized(&ds, &basis, cfg, &tc).unwrap();
        assert_eq!(a.history.len(), 30);
        assert!(a.history[29].loss < a.history[0].loss);
        let strip = |h: &[EpochRecord]| {
            h.iter()
                .map(|r| (r.loss.to_bits(), r.val_accuracy))
                .collect::<Vec<_>>()
        };
        assert_eq!(strip(&a.history), strip(&b.history));
        assert_eq!(a.state, b.state);
    }

    #[test]
    fn dropout_changes_the_trajectory_deterministically() {
        let (ds, basis, mut cfg) = setup();
        cfg.dropout = 0.2;
        let tc = TrainConfig {
            epochs: 3,
            patience: None,
            ..TrainConfig::default()
        };
        let a = train_centralized(&ds, &basis, cfg.clone(), &tc).unwrap();
        let b = train_centralized(&ds, &basis, cfg.clone(), &tc).unwrap();
        assert_eq!(a.state, b.state);
        cfg.dropout = 0.0;
        let c = train_centralized(&ds, &basis, cfg, &tc).unwrap();
        assert_ne!(a.state, c.state);
    }

    #[test]
    fn zero_learning_rate_keeps_parameters() {
        let (ds, basis, cfg) = setup();
        let tc = TrainConfig {
            epochs: 3,
            restore_best: false,
            adam: AdamConfig {
                lr: 0.0,
                ..AdamConfig::default()
            },
            ..TrainConfig::default()
        };
        let out = train_centralized(&ds, &basis, cfg.clone(), &tc).unwrap();
        assert_eq!(out.state, ModelState::init(cfg, 0).unwrap());
    }

    #[test]
    fn early_stopping_restores_best_epoch() {
        let (ds, basis, cfg) = setup();
        let tc = TrainConfig {
            epochs: 200,
            patience: Some(3),
            adam: AdamConfig {
                lr: 0.05,
                ..AdamConfig::default()
            },
            ..TrainConfig::default()
        };
        let out = train_centralized(&ds, &basis, cfg, &tc).unwrap();
        let at = out.selected_epoch.unwrap();
        let best = out.history[at].val_accuracy.unwrap();
        assert!(out.history.iter().all(|r| r.val_accuracy.unwrap() <= best));
        assert_eq!(out.evaluation.val, Some(best));
        assert!(out.history.len() < 200 || at + 3 > 199);
    }

    #[test]
    fn empty_training_mask_is_rejected() {
        let (ds, basis, cfg) = setup();
        let n = ds.num_nodes();
        let ds = ds.with_masks(crate::graph::Masks::empty(n)).unwrap();
        let err = train_centralized(&ds, &basis, cfg, &TrainConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Empty(_)));
    }
}
