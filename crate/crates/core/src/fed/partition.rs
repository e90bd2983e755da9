//! Label-Dirichlet partitioning and client subgraphs.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Gamma};

use crate::error::{Error, Result};
use crate::graph::{split_masks, GraphDataset, Masks, SplitFractions};
use crate::rng::{rng_for, stream};
use crate::tensor::Tensor;
use crate::util::largest_remainder;

/// One draw from `Dirichlet(alpha · 1_m)`.
///
/// Gamma variates are drawn in log space as `log G(1 + alpha) + log(U) / alpha`
/// so that tiny concentrations do not underflow to an all-zero vector.
pub fn dirichlet_sample<R: Rng + ?Sized>(alpha: f64, m: usize, rng: &mut R) -> Result<Vec<f64>> {
    if !(alpha > 0.0 && alpha.is_finite()) || m == 0 {
        return Err(Error::InvalidConfig(format!(
            "Dirichlet needs alpha > 0 and m >= 1, got alpha = {alpha}, m = {m}"
        )));
    }
    let gamma = Gamma::new(alpha + 1.0, 1.0)
        .map_err(|e| Error::InvalidConfig(format!("gamma shape {}: {e}", alpha + 1.0)))?;
    let logs: Vec<f64> = (0..m)
        .map(|_| {
            let g: f64 = gamma.sample(rng);
            let u: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
            g.ln() + u.ln() / alpha
        })
        .collect();
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
    let total: f64 = weights.iter().sum();
    Ok(weights.into_iter().map(|w| w / total).collect())
}

/// Client node lists plus any empty-client repairs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    /// Ascending global node ids per client.
    pub clients: Vec<Vec<usize>>,
    /// `(node, from, to)` moves made to give every client at least one node.
    pub reassigned: Vec<(usize, usize, usize)>,
}

impl Partition {
    pub fn num_clients(&self) -> usize {
        self.clients.len()
    }

    /// `owner[node]` is the client holding `node`.
    pub fn owners(&self, n: usize) -> Vec<usize> {
        let mut owner = vec![usize::MAX; n];
        for (c, nodes) in self.clients.iter().enumerate() {
            for &v in nodes {
                owner[v] = c;
            }
        }
        owner
    }
}

/// Splits each class over `m` clients with proportions drawn from
/// `Dirichlet(alpha · 1_m)` and largest-remainder rounding.
pub fn dirichlet_partition(labels: &[usize], m: usize, alpha: f64, seed: u64) -> Result<Partition> {
    if m == 0 {
        return Err(Error::InvalidConfig(
            "at least one client is required".into(),
        ));
    }
    if labels.len() < m {
        return Err(Error::InvalidConfig(format!(
            "{} nodes cannot fill {m} clients",
            labels.len()
        )));
    }
    let classes = labels.iter().copied().max().map_or(0, |c| c + 1);
    let mut clients: Vec<Vec<usize>> = vec![Vec::new(); m];
    for c in 0..classes {
        let mut nodes: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        if nodes.is_empty() {
            continue;
        }
        let mut rng = rng_for(seed, &[stream::PARTITION, c as u64]);
        nodes.shuffle(&mut rng);
        let props = dirichlet_sample(alpha, m, &mut rng)?;
        let counts = largest_remainder(nodes.len(), &props);
        let mut offset = 0;
        for (client, &k) in counts.iter().enumerate() {
            clients[client].extend_from_slice(&nodes[offset..offset + k]);
            offset += k;
        }
    }
    let mut reassigned = Vec::new();
    while let Some(empty) = clients.iter().position(Vec::is_empty) {
        let largest = (0..m).fold(0, |b, i| {
            if clients[i].len() > clients[b].len() {
                i
            } else {
                b
            }
        });
        clients[largest].sort_unstable();
        let node = clients[largest].pop().expect("largest client is non-empty");
        log::warn!("client {empty} received no nodes; moved node {node} from client {largest}");
        clients[empty].push(node);
        reassigned.push((node, largest, empty));
    }
    for c in clients.iter_mut() {
        c.sort_unstable();
    }
    Ok(Partition {
        clients,
        reassigned,
    })
}

/// The subgraph on `nodes` (in the given order). Edges leaving the set are
/// dropped; masks are re-split locally.
pub fn induce_subgraph(
    global: &GraphDataset,
    nodes: &[usize],
    fractions: SplitFractions,
    seed: u64,
) -> Result<GraphDataset> {
    if nodes.is_empty() {
        return Err(Error::Empty("induced subgraph node list".into()));
    }
    let n = global.num_nodes();
    let mut seen = vec![false; n];
    for &v in nodes {
        if v >= n || seen[v] {
            return Err(Error::InvalidConfig(format!(
                "node {v} is out of range or repeated"
            )));
        }
        seen[v] = true;
    }
    let k = nodes.len();
    let adj = global.adjacency();
    let mut sub = Tensor::zeros(k, k);
    for (i, &u) in nodes.iter().enumerate() {
        for (j, &v) in nodes.iter().enumerate() {
            sub.set(i, j, adj.get(u, v));
        }
    }
    let f = global.num_features();
    let mut feats = Tensor::zeros(k, f);
    for (i, &u) in nodes.iter().enumerate() {
        feats
            .row_slice_mut(i)
            .copy_from_slice(global.features().row_slice(u));
    }
    let labels: Vec<usize> = nodes.iter().map(|&u| global.labels()[u]).collect();
    let masks = split_masks(&labels, fractions, seed)?;
    GraphDataset::new(
        global.name(),
        sub,
        feats,
        labels,
        global.num_classes(),
        masks,
    )
}

/// Client masks mapped back onto the global node ids.
pub fn global_masks(n: usize, partition: &Partition, client_masks: &[&Masks]) -> Masks {
    let mut out = Masks::empty(n);
    for (nodes, m) in partition.clients.iter().zip(client_masks) {
        for (i, &v) in nodes.iter().enumerate() {
            out.train[v] = m.train[i];
            out.val[v] = m.val[i];
            out.test[v] = m.test[i];
        }
    }
    out
}

/// Per-client label counts (`clients × classes`).
pub fn label_histograms(
    labels: &[usize],
    partition: &Partition,
    classes: usize,
) -> Vec<Vec<usize>> {
    partition
        .clients
        .iter()
        .map(|nodes| {
            let mut h = vec![0; classes];
            for &v in nodes {
                h[labels[v]] += 1;
            }
            h
        })
        .collect()
}

/// Largest class share of each client.
pub fn max_class_shares(histograms: &[Vec<usize>]) -> Vec<f64> {
    histograms
        .iter()
        .map(|h| {
            let total: usize = h.iter().sum();
            let top = h.iter().copied().max().unwrap_or(0);
            if total == 0 {
                0.0
            } else {
                top as f64 / total as f64
            }
        })
        .collect()
}

/// Total-variation distance between each client's label distribution and the
/// pooled one (zero for an empty client).
pub fn tv_distances(histograms: &[Vec<usize>]) -> Vec<f64> {
    let classes = histograms.first().map_or(0, Vec::len);
    let mut pooled = vec![0usize; classes];
    for h in histograms {
        for (p, v) in pooled.iter_mut().zip(h) {
            *p += v;
        }
    }
    let grand: usize = pooled.iter().sum();
    histograms
        .iter()
        .map(|h| {
            let n: usize = h.iter().sum();
            if n == 0 || grand == 0 {
                return 0.0;
            }
            0.5 * h
                .iter()
                .zip(&pooled)
                .map(|(&a, &b)| (a as f64 / n as f64 - b as f64 / grand as f64).abs())
                .sum::<f64>()
        })
        .collect()
}

/// Mean of [`tv_distances`] over clients.
pub fn mean_tv_skew(histograms: &[Vec<usize>]) -> f64 {
    if histograms.is_empty() {
        return 0.0;
    }
    tv_distances(histograms).iter().sum::<f64>() / histograms.len() as f64
}
