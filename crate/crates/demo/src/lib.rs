//! WebAssembly bindings for a static demo page.
//!
//! Three operations, each a plain Rust function plus a thin `wasm_bindgen`
//! wrapper: the normalized Laplacian spectrum of a block model, the label
//! histograms of a Dirichlet partition, and a short training run that returns
//! the learned spectral filters.

use gnodeformer::fed::{dirichlet_partition, label_histograms};
use gnodeformer::graph::{generate_sbm, SbmSpec};
use gnodeformer::model::{ModelConfig, RkOrder};
use gnodeformer::spectral::sym_eig;
use gnodeformer::train::{train_centralized, TrainConfig};
use wasm_bindgen::prelude::*;

/// Larger graphs make the dense eigensolver too slow for a page.
pub const MAX_NODES: usize = 400;

fn parse_spec(spec: &str) -> Result<SbmSpec, String> {
    let spec: SbmSpec = spec
        .parse()
        .map_err(|e: gnodeformer::Error| e.to_string())?;
    if spec.num_nodes() > MAX_NODES {
        return Err(format!(
            "{} nodes exceed the demo limit of {MAX_NODES}",
            spec.num_nodes()
        ));
    }
    Ok(spec)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    pub homophily: f64,
    pub edges: usize,
}

pub fn spectrum(spec: &str) -> Result<Spectrum, String> {
    let g = generate_sbm(&parse_spec(spec)?).map_err(|e| e.to_string())?;
    let basis = sym_eig(&g.normalized_laplacian()).map_err(|e| e.to_string())?;
    Ok(Spectrum {
        eigenvalues: basis.eigenvalues().to_vec(),
        homophily: g.homophily_ratio().unwrap_or(f64::NAN),
        edges: g.num_edges(),
    })
}

/// Row-major `clients × classes` label counts.
pub fn partition(
    blocks: &[usize],
    clients: usize,
    alpha: f64,
    seed: u64,
) -> Result<Vec<u32>, String> {
    let labels: Vec<usize> = blocks
        .iter()
        .enumerate()
        .flat_map(|(c, &n)| std::iter::repeat_n(c, n))
        .collect();
    let p = dirichlet_partition(&labels, clients, alpha, seed).map_err(|e| e.to_string())?;
    Ok(label_histograms(&labels, &p, blocks.len())
        .into_iter()
        .flatten()
        .map(|c| c as u32)
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Filters {
    pub test_accuracy: f64,
    pub losses: Vec<f64>,
    pub eigenvalues: Vec<f64>,
    /// Channel-major `channels × n` filter responses.
    pub gamma: Vec<f64>,
    pub channels: usize,
}

pub fn train_filters(spec: &str, epochs: usize, rk: usize, seed: u64) -> Result<Filters, String> {
    let g = generate_sbm(&parse_spec(spec)?).map_err(|e| e.to_string())?;
    let basis = sym_eig(&g.normalized_laplacian()).map_err(|e| e.to_string())?;
    let model = ModelConfig {
        width: 16,
        heads: 2,
        layers: 1,
        hidden: 16,
        channels: 3,
        rk_order: RkOrder::from_stages(rk).map_err(|e| e.to_string())?,
        ..ModelConfig::for_dataset(&g)
    };
    let tc = TrainConfig {
        epochs,
        patience: None,
        restore_best: false,
        seed,
        ..TrainConfig::default()
    };
    let out = train_centralized(&g, &basis, model, &tc).map_err(|e| e.to_string())?;
    let (_, gamma) = out
        .state
        .predict(&basis, g.features())
        .map_err(|e| e.to_string())?;
    let (n, m) = (gamma.rows(), gamma.cols());
    Ok(Filters {
        test_accuracy: out.evaluation.test.unwrap_or(f64::NAN),
        losses: out.history.iter().map(|r| r.loss).collect(),
        eigenvalues: basis.eigenvalues().to_vec(),
        gamma: (0..m)
            .flat_map(|c| (0..n).map(move |k| (c, k)))
            .map(|(c, k)| gamma.get(k, c))
            .collect(),
        channels: m,
    })
}

#[wasm_bindgen]
pub struct SpectrumView(Spectrum);

#[wasm_bindgen]
impl SpectrumView {
    pub fn eigenvalues(&self) -> Vec<f64> {
        self.0.eigenvalues.clone()
    }

    pub fn homophily(&self) -> f64 {
        self.0.homophily
    }

    pub fn edges(&self) -> usize {
        self.0.edges
    }
}

#[wasm_bindgen(js_name = sbmSpectrum)]
pub fn sbm_spectrum(spec: &str) -> Result<SpectrumView, JsError> {
    spectrum(spec)
        .map(SpectrumView)
        .map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = dirichletHistograms)]
pub fn dirichlet_histograms(
    blocks: &[u32],
    clients: usize,
    alpha: f64,
    seed: u32,
) -> Result<Vec<u32>, JsError> {
    let blocks: Vec<usize> = blocks.iter().map(|&b| b as usize).collect();
    partition(&blocks, clients, alpha, seed as u64).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub struct FiltersView(Filters);

#[wasm_bindgen]
impl FiltersView {
    #[wasm_bindgen(js_name = testAccuracy)]
    pub fn test_accuracy(&self) -> f64 {
        self.0.test_accuracy
    }

    pub fn losses(&self) -> Vec<f64> {
        self.0.losses.clone()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.0.eigenvalues.clone()
    }

    pub fn gamma(&self) -> Vec<f64> {
        self.0.gamma.clone()
    }

    pub fn channels(&self) -> usize {
        self.0.channels
    }
}

#[wasm_bindgen(js_name = trainFilters)]
pub fn train_filters_js(
    spec: &str,
    epochs: usize,
    rk: usize,
    seed: u32,
) -> Result<FiltersView, JsError> {
    train_filters(spec, epochs, rk, seed as u64)
        .map(FiltersView)
        .map_err(|e| JsError::new(&e))
}
