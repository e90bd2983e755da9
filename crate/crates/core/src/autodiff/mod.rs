//! Dense reverse-mode differentiation and the Adam optimizer.

mod adam;
mod attention;
mod params;
mod tape;

pub use adam::{adam_step, AdamConfig, OptimizerState};
pub use attention::attention_weights;
pub use params::{backward, Binding, ParamSet};
pub use tape::{Gradients, Tape, Var};
