//! Spectral graph transformer with a learnable ODE filter stack, trained
//! centrally or across simulated federated clients.
//!
//! Graphs are dense: the normalized Laplacian is eigendecomposed once
//! ([`spectral::sym_eig`]) and every layer filters in that basis.
//! [`train::train_centralized`] and [`fed::run_rounds`] share the same model
//! and optimizer code, so a single-client federation reproduces centralized
//! training exactly.

pub mod autodiff;
pub mod error;
pub mod fed;
pub mod graph;
pub mod model;
pub mod rng;
pub mod spectral;
pub mod tensor;
pub mod train;
mod util;

pub use error::{Error, ErrorKind, Result};
pub use tensor::Tensor;
pub use util::Stopwatch;
