//! Single-process federated simulation: Dirichlet label partitioning, local
//! client training, fraction-fit sampling, FedAvg and byte accounting.

mod aggregate;
mod client;
mod partition;

use std::path::PathBuf;

pub use aggregate::{
    comm_accounting, comm_for_count, fedavg, participants_per_round, round_bytes, sample_clients,
    CommStats, WIRE_BYTES_PER_PARAM,
};
pub use client::{client_update, ClientState, ClientUpdate};
pub use partition::{
    dirichlet_partition, dirichlet_sample, global_masks, induce_subgraph, label_histograms,
    max_class_shares, mean_tv_skew, tv_distances, Partition,
};

use crate::autodiff::{AdamConfig, ParamSet, Tape};
use crate::error::{Error, Result};
use crate::graph::{GraphDataset, Masks, SplitFractions};
use crate::model::{accuracy, forward, ModelConfig, ModelState};
use crate::rng::{derive_seed, stream};
use crate::spectral::load_or_compute;

#[derive(Debug, Clone, PartialEq)]
pub struct FedConfig {
    /// Client count `m`.
    pub clients: usize,
    /// Dirichlet concentration.
    pub alpha: f64,
    /// Fraction of clients sampled per round.
    pub fraction_fit: f64,
    pub rounds: usize,
    pub local_epochs: usize,
    pub seed: u64,
    pub model: ModelConfig,
    pub adam: AdamConfig,
    pub split: SplitFractions,
    /// Upper bound on concurrent client updates.
    pub threads: usize,
    /// Directory for cached eigendecompositions.
    pub cache_dir: Option<PathBuf>,
}

impl FedConfig {
    pub fn new(model: ModelConfig) -> Self {
        FedConfig {
            clients: 5,
            alpha: 1.0,
            fraction_fit: 1.0,
            rounds: 40,
            local_epochs: 5,
            seed: 0,
            model,
            adam: AdamConfig::default(),
            split: SplitFractions::default(),
            threads: 1,
            cache_dir: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.clients == 0 {
            return Err(Error::InvalidConfig(
                "at least one client is required".into(),
            ));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "alpha must be positive, got {}",
                self.alpha
            )));
        }
        if !(self.fraction_fit > 0.0 && self.fraction_fit <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "fraction fit must lie in (0, 1], got {}",
                self.fraction_fit
            )));
        }
        if self.threads == 0 {
            return Err(Error::InvalidConfig(
                "thread count must be at least 1".into(),
            ));
        }
        self.model.validate()?;
        self.adam.validate()?;
        self.split.validate()
    }
}

/// Local metrics of one participant in one round.
#[derive(Debug, Clone, PartialEq)]
pub struct ClientRoundMetrics {
    pub client: usize,
    /// Loss and accuracy of the last local epoch; `None` when the update failed.
    pub loss: Option<f64>,
    pub accuracy: Option<f64>,
    pub epoch_losses: Vec<f64>,
    /// Mean wall-clock seconds per local epoch.
    pub epoch_seconds: f64,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub round: usize,
    pub participants: Vec<usize>,
    pub clients: Vec<ClientRoundMetrics>,
    /// Pooled test loss and accuracy of the aggregated model over every client.
    pub global_loss: Option<f64>,
    pub global_accuracy: Option<f64>,
    pub bytes: usize,
    pub bytes_cum: usize,
    /// Mean wall-clock seconds per local epoch over successful participants.
    pub epoch_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct FedOutcome {
    pub records: Vec<RoundRecord>,
    pub params: ParamSet,
    pub partition: Partition,
    /// Eigendecomposition seconds per client, reported apart from training.
    pub eig_seconds: Vec<f64>,
    pub client_sizes: Vec<usize>,
}

fn client_split_seed(seed: u64, client: usize) -> u64 {
    derive_seed(seed, &[stream::SPLIT, client as u64])
}

/// Partitions `global` and builds every client's subgraph with local masks.
pub fn build_clients(
    global: &GraphDataset,
    config: &FedConfig,
) -> Result<(Partition, Vec<ClientState>)> {
    let partition =
        dirichlet_partition(global.labels(), config.clients, config.alpha, config.seed)?;
    let clients = partition
        .clients
        .iter()
        .enumerate()
        .map(|(id, nodes)| {
            let ds = induce_subgraph(
                global,
                nodes,
                config.split,
                client_split_seed(config.seed, id),
            )?;
            Ok(ClientState::new(id, ds, nodes.clone()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((partition, clients))
}

/// The union of the client masks on global node ids: the split a centralized
/// baseline should use to match a federated run.
pub fn federated_masks(global: &GraphDataset, config: &FedConfig) -> Result<Masks> {
    let (partition, clients) = build_clients(global, config)?;
    let masks: Vec<&Masks> = clients.iter().map(|c| c.dataset.masks()).collect();
    Ok(global_masks(global.num_nodes(), &partition, &masks))
}

/// Runs `f` on every element, on up to `threads` scoped threads, keeping order.
fn parallel_map<T: Send, R: Send>(
    items: Vec<T>,
    threads: usize,
    f: impl Fn(T) -> R + Sync,
) -> Vec<R> {
    if threads <= 1 || items.len() <= 1 {
        return items.into_iter().map(f).collect();
    }
    let per = items.len().div_ceil(threads);
    let mut chunks: Vec<Vec<T>> = Vec::new();
    let mut it = items.into_iter().peekable();
    while it.peek().is_some() {
        chunks.push(it.by_ref().take(per).collect());
    }
    let f = &f;
    std::thread::scope(|s| {
        let handles: Vec<_> = chunks
            .into_iter()
            .map(|chunk| s.spawn(move || chunk.into_iter().map(f).collect::<Vec<R>>()))
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("client worker panicked"))
            .collect()
    })
}

/// Pooled test loss and accuracy of `params` over all clients.
fn evaluate_global(
    params: &ParamSet,
    model: &ModelConfig,
    clients: &[ClientState],
) -> Result<(Option<f64>, Option<f64>)> {
    let mut loss_sum = 0.0;
    let mut hits = 0.0;
    let mut total = 0usize;
    for c in clients {
        let test = &c.dataset.masks().test;
        let k = test.iter().filter(|&&m| m).count();
        if k == 0 {
            continue;
        }
        let basis = c
            .cached_basis()
            .expect("bases are prepared before the first round");
        let mut tape = Tape::eval();
        let bind = params.bind(&mut tape);
        let x = tape.constant(c.dataset.features().clone());
        let out = forward(&mut tape, &bind, model, basis, x, 0)?;
        let loss = tape.masked_cross_entropy(out.logits, c.dataset.labels(), test)?;
        loss_sum += tape.value(loss).item() * k as f64;
        hits += accuracy(tape.value(out.logits), c.dataset.labels(), test)? * k as f64;
        total += k;
    }
    if total == 0 {
        return Ok((None, None));
    }
    Ok((Some(loss_sum / total as f64), Some(hits / total as f64)))
}

pub fn run_rounds(global: &GraphDataset, config: &FedConfig) -> Result<FedOutcome> {
    run_rounds_with(global, config, |_, _| Ok(()))
}

/// [`run_rounds`] with an observer called after every round (for checkpoints
/// and streaming metrics).
pub fn run_rounds_with(
    global: &GraphDataset,
    config: &FedConfig,
    mut observer: impl FnMut(&RoundRecord, &ParamSet) -> Result<()>,
) -> Result<FedOutcome> {
    config.validate()?;
    if config.model.num_features != global.num_features()
        || config.model.num_classes != global.num_classes()
    {
        return Err(Error::InvalidConfig(format!(
            "model expects {} features and {} classes, dataset has {} and {}",
            config.model.num_features,
            config.model.num_classes,
            global.num_features(),
            global.num_classes()
        )));
    }
    let mut params = ModelState::init(config.model.clone(), config.seed)?.params;
    let (partition, mut clients) = build_clients(global, config)?;
    let client_sizes: Vec<usize> = clients.iter().map(ClientState::num_nodes).collect();
    if config.rounds == 0 {
        return Ok(FedOutcome {
            records: Vec::new(),
            params,
            partition,
            eig_seconds: vec![0.0; clients.len()],
            client_sizes,
        });
    }

    let cache = config.cache_dir.as_deref();
    let prepared = parallel_map(
        clients.iter_mut().collect(),
        config.threads,
        |c: &mut ClientState| {
            match cache {
                Some(dir) => {
                    let watch = crate::util::Stopwatch::start();
                    let b = load_or_compute(&c.dataset.normalized_laplacian(), Some(dir))?;
                    c.set_basis(b);
                    c.eig_seconds = watch.seconds();
                }
                None => {
                    c.basis()?;
                }
            }
            Ok(())
        },
    );
    prepared.into_iter().collect::<Result<Vec<()>>>()?;
    let eig_seconds: Vec<f64> = clients.iter().map(|c| c.eig_seconds).collect();

    let count = params.num_scalars();
    let mut records = Vec::with_capacity(config.rounds);
    let mut bytes_cum = 0usize;
    for round in 0..config.rounds {
        let participants = sample_clients(config.clients, config.fraction_fit, round, config.seed);
        let chosen: Vec<&mut ClientState> = clients
            .iter_mut()
            .filter(|c| participants.binary_search(&c.id).is_ok())
            .collect();
        let current = &params;
        let results = parallel_map(chosen, config.threads, |c: &mut ClientState| {
            let id = c.id;
            let weight = c.num_nodes() as f64;
            let r = client_update(
                current,
                c,
                &config.model,
                config.local_epochs,
                config.adam,
                config.seed,
                round,
            );
            (id, weight, r)
        });

        let mut metrics = Vec::with_capacity(results.len());
        let mut updates: Vec<(ParamSet, f64)> = Vec::new();
        for (id, weight, result) in results {
            match result {
                Ok(u) => {
                    let secs = if u.epoch_seconds.is_empty() {
                        0.0
                    } else {
                        u.epoch_seconds.iter().sum::<f64>() / u.epoch_seconds.len() as f64
                    };
                    metrics.push(ClientRoundMetrics {
                        client: id,
                        loss: u.losses.last().copied(),
                        accuracy: u.accuracies.last().copied(),
                        epoch_losses: u.losses,
                        epoch_seconds: secs,
                        failure: None,
                    });
                    updates.push((u.params, weight));
                }
                Err(e @ (Error::NonFinite(_) | Error::Empty(_))) => {
                    log::warn!("round {round}: client {id} skipped: {e}");
                    metrics.push(ClientRoundMetrics {
                        client: id,
                        loss: None,
                        accuracy: None,
                        epoch_losses: Vec::new(),
                        epoch_seconds: 0.0,
                        failure: Some(e.to_string()),
                    });
                }
                Err(e) => return Err(e),
            }
        }
        if updates.is_empty() {
            log::warn!("round {round}: every participant failed; global parameters kept");
        } else {
            let sets: Vec<&ParamSet> = updates.iter().map(|(p, _)| p).collect();
            let weights: Vec<f64> = updates.iter().map(|(_, w)| *w).collect();
            params = fedavg(&sets, &weights)?;
        }
        let (global_loss, global_accuracy) = evaluate_global(&params, &config.model, &clients)?;
        let bytes = round_bytes(participants.len(), count);
        bytes_cum += bytes;
        let ok: Vec<f64> = metrics
            .iter()
            .filter(|m| m.failure.is_none())
            .map(|m| m.epoch_seconds)
            .collect();
        let epoch_seconds = if ok.is_empty() {
            0.0
        } else {
            ok.iter().sum::<f64>() / ok.len() as f64
        };
        let record = RoundRecord {
            round,
            participants,
            clients: metrics,
            global_loss,
            global_accuracy,
            bytes,
            bytes_cum,
            epoch_seconds,
        };
        log::info!(
            "round {round}: global accuracy {:?}",
            record.global_accuracy
        );
        observer(&record, &params)?;
        records.push(record);
    }
    Ok(FedOutcome {
        records,
        params,
        partition,
        eig_seconds,
        client_sizes,
    })
}
