//! Undirected node-classification graphs: adjacency, features, labels and
//! train/val/test masks, plus the symmetric normalized Laplacian.

mod io;
mod sbm;
mod split;

pub use io::{load_dataset, write_dataset, LoadOptions};
pub use sbm::{generate_sbm, SbmSpec};
pub use split::{split_masks, Masks, SplitFractions};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq)]
pub struct GraphDataset {
    name: String,
    adjacency: Tensor,
    features: Tensor,
    labels: Vec<usize>,
    num_classes: usize,
    masks: Masks,
}

impl GraphDataset {
    /// Validates and assembles a dataset. `adjacency` must be a symmetric 0/1
    /// matrix with an empty diagonal.
    pub fn new(
        name: impl Into<String>,
        adjacency: Tensor,
        features: Tensor,
        labels: Vec<usize>,
        num_classes: usize,
        masks: Masks,
    ) -> Result<Self> {
        let n = labels.len();
        if adjacency.shape() != [n, n] {
            return Err(Error::ShapeMismatch(format!(
                "adjacency is {}x{} but there are {n} labels",
                adjacency.rows(),
                adjacency.cols()
            )));
        }
        if features.rows() != n {
            return Err(Error::ShapeMismatch(format!(
                "feature matrix has {} rows, expected {n}",
                features.rows()
            )));
        }
        if !features.all_finite() {
            return Err(Error::InvalidDataset("non-finite feature value".into()));
        }
        for i in 0..n {
            if adjacency.get(i, i) != 0.0 {
                return Err(Error::InvalidDataset(format!(
                    "self-loop stored at node {i}"
                )));
            }
            for j in (i + 1)..n {
                let a = adjacency.get(i, j);
                if a != 0.0 && a != 1.0 {
                    return Err(Error::InvalidDataset(format!(
                        "adjacency entry ({i}, {j}) = {a} is not 0/1"
                    )));
                }
                if a != adjacency.get(j, i) {
                    return Err(Error::AsymmetricAdjacency(i, j));
                }
            }
        }
        if let Some((i, &l)) = labels.iter().enumerate().find(|(_, &l)| l >= num_classes) {
            return Err(Error::InvalidDataset(format!(
                "node {i} has label {l} but there are {num_classes} classes"
            )));
        }
        masks.validate(n)?;
        Ok(GraphDataset {
            name: name.into(),
            adjacency,
            features,
            labels,
            num_classes,
            masks,
        })
    }

    /// Builds the adjacency matrix from an undirected edge list.
    ///
    /// Self-loops are dropped with a warning and duplicate edges are merged.
    pub fn adjacency_from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Tensor> {
        let mut adj = Tensor::zeros(n, n);
        for &(u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::InvalidDataset(format!(
                    "edge ({u}, {v}) references a node outside 0..{n}"
                )));
            }
            if u == v {
                log::warn!("dropping self-loop on node {u}");
                continue;
            }
            adj.set(u, v, 1.0);
            adj.set(v, u, 1.0);
        }
        Ok(adj)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn num_nodes(&self) -> usize {
        self.labels.len()
    }

    pub fn num_features(&self) -> usize {
        self.features.cols()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn adjacency(&self) -> &Tensor {
        &self.adjacency
    }

    pub fn features(&self) -> &Tensor {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn masks(&self) -> &Masks {
        &self.masks
    }

    pub fn with_masks(mut self, masks: Masks) -> Result<Self> {
        masks.validate(self.num_nodes())?;
        self.masks = masks;
        Ok(self)
    }

    /// Undirected edges `(i, j)` with `i < j`, in row-major order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let n = self.num_nodes();
        let mut out = Vec::new();
        for i in 0..n {
            let row = self.adjacency.row_slice(i);
            for (j, &a) in row.iter().enumerate().skip(i + 1) {
                if a != 0.0 {
                    out.push((i, j));
                }
            }
        }
        out
    }

    pub fn num_edges(&self) -> usize {
        self.edges().len()
    }

    pub fn degrees(&self) -> Vec<f64> {
        (0..self.num_nodes())
            .map(|i| self.adjacency.row_slice(i).iter().sum())
            .collect()
    }

    /// Fraction of edges whose endpoints share a label; `None` for an edgeless graph.
    pub fn homophily_ratio(&self) -> Option<f64> {
        let edges = self.edges();
        if edges.is_empty() {
            return None;
        }
        let same = edges
            .iter()
            .filter(|&&(i, j)| self.labels[i] == self.labels[j])
            .count();
        Some(same as f64 / edges.len() as f64)
    }

    /// Per-class node counts.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Symmetric normalized Laplacian `I - D^{-1/2} A D^{-1/2}`.
    pub fn normalized_laplacian(&self) -> Tensor {
        build_normalized_laplacian(&self.adjacency)
    }
}

/// `L = I - D^{-1/2} A D^{-1/2}`. Zero-degree nodes get a zero `D^{-1/2}` entry,
/// so their row and column equal the identity's.
pub fn build_normalized_laplacian(adjacency: &Tensor) -> Tensor {
    let n = adjacency.rows();
    let inv_sqrt: Vec<f64> = (0..n)
        .map(|i| {
            let d: f64 = adjacency.row_slice(i).iter().sum();
            if d > 0.0 {
                1.0 / d.sqrt()
            } else {
                0.0
            }
        })
        .collect();
    let mut lap = Tensor::zeros(n, n);
    for i in 0..n {
        let row = adjacency.row_slice(i);
        let out = lap.row_slice_mut(i);
        for j in 0..n {
            // s_i * s_j is commutative, which keeps L exactly symmetric.
            out[j] = -row[j] * (inv_sqrt[i] * inv_sqrt[j]);
        }
        out[i] += 1.0;
    }
    lap
}
