//! Numeric substrate for the action language models and the Q-network:
//! dense `f64` tensors, a per-invocation reverse-mode tape, GRU cells,
//! Adam with clipping and scheduling, seeded randomness, and finite-difference
//! gradient checks.

pub mod check;
pub mod error;
pub mod graph;
pub mod layers;
pub mod optim;
pub mod params;
pub mod rng;
pub mod tensor;

pub use error::{Result, TensorError};
pub use graph::{Graph, Var};
pub use layers::{gru_cell, vec_mat_acc, GruCell, Linear};
pub use optim::{Adam, AdamConfig, StepInfo};
pub use params::{Gradients, ParamId, ParamStore};
pub use rng::Rng;
pub use tensor::Tensor;
