//! Minimal reverse-mode differentiable kernel: tensors, a gradient tape,
//! dense and relation-typed layers, Adam, gradient checking and checkpoints.

mod adam;
mod checkpoint;
mod gradcheck;
mod layers;
mod params;
mod tape;
mod tensor;

pub use adam::{AdamConfig, AdamState};
pub use checkpoint::{AdamSnapshot, Checkpoint, FORMAT_VERSION};
pub use gradcheck::{grad_check, GradCheckConfig, GradCheckReport};
pub use layers::{MessageGraph, Mlp, RelGnn, LEAKY_SLOPE};
pub use params::{leaky_gain, Gradients, Init, ParamEntry, ParamId, ParamStore};
pub use tape::{sigmoid, Aggregation, BackwardFault, Tape, Var};
pub use tensor::Tensor;
