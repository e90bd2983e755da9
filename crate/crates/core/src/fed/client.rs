//! Client state and local training.

use crate::autodiff::{AdamConfig, OptimizerState, ParamSet};
use crate::error::Result;
use crate::graph::GraphDataset;
use crate::model::{ModelConfig, ModelState};
use crate::spectral::{sym_eig, SpectralBasis};
use crate::train::{epoch_seed, train_step};
use crate::util::Stopwatch;

/// One simulated client: its subgraph, cached eigenbasis and optimizer moments.
#[derive(Debug, Clone)]
pub struct ClientState {
    pub id: usize,
    pub dataset: GraphDataset,
    /// Global ids of the local nodes, in local order.
    pub nodes: Vec<usize>,
    basis: Option<SpectralBasis>,
    optimizer: Option<OptimizerState>,
    /// Time spent in the one-off eigendecomposition.
    pub eig_seconds: f64,
}

impl ClientState {
    pub fn new(id: usize, dataset: GraphDataset, nodes: Vec<usize>) -> Self {
        ClientState {
            id,
            dataset,
            nodes,
            basis: None,
            optimizer: None,
            eig_seconds: 0.0,
        }
    }

    /// FedAvg weight.
    pub fn num_nodes(&self) -> usize {
        self.dataset.num_nodes()
    }

    /// Decomposes the local Laplacian on first use.
    pub fn basis(&mut self) -> Result<&SpectralBasis> {
        if self.basis.is_none() {
            let watch = Stopwatch::start();
            let b = sym_eig(&self.dataset.normalized_laplacian())?;
            self.eig_seconds = watch.seconds();
            self.basis = Some(b);
        }
        Ok(self.basis.as_ref().expect("just computed"))
    }

    pub fn cached_basis(&self) -> Option<&SpectralBasis> {
        self.basis.as_ref()
    }

    pub fn set_basis(&mut self, basis: SpectralBasis) {
        self.basis = Some(basis);
    }
}

/// Result of one local update.
#[derive(Debug, Clone)]
pub struct ClientUpdate {
    pub params: ParamSet,
    /// Per-epoch training loss and accuracy (before each step).
    pub losses: Vec<f64>,
    pub accuracies: Vec<f64>,
    pub epoch_seconds: Vec<f64>,
}

/// Runs `local_epochs` full-graph epochs from `global` on the client's train
/// mask. Adam moments persist across rounds on the client and are only
/// committed when every epoch succeeds. `global` is never modified.
#[allow(clippy::too_many_arguments)]
pub fn client_update(
    global: &ParamSet,
    client: &mut ClientState,
    model: &ModelConfig,
    local_epochs: usize,
    adam: AdamConfig,
    seed: u64,
    round: usize,
) -> Result<ClientUpdate> {
    let mut state = ModelState::from_params(model.clone(), global.clone())?;
    let mut optimizer = client
        .optimizer
        .clone()
        .unwrap_or_else(|| OptimizerState::new(global, adam));
    optimizer.config = adam;
    client.basis()?;
    let basis = client.basis.as_ref().expect("computed above");
    let mut out = ClientUpdate {
        params: ParamSet::new(),
        losses: Vec::with_capacity(local_epochs),
        accuracies: Vec::with_capacity(local_epochs),
        epoch_seconds: Vec::with_capacity(local_epochs),
    };
    let ds = &client.dataset;
    for r in 0..local_epochs {
        let watch = Stopwatch::start();
        let step = train_step(
            &mut state,
            &mut optimizer,
            basis,
            ds.features(),
            ds.labels(),
            &ds.masks().train,
            epoch_seed(seed, client.id, round * local_epochs + r),
        )?;
        out.epoch_seconds.push(watch.seconds());
        out.losses.push(step.loss);
        out.accuracies.push(step.accuracy);
    }
    client.optimizer = Some(optimizer);
    out.params = state.params;
    Ok(out)
}
