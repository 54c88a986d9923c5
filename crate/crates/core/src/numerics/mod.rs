//! Dense 2-D tensors with tape-based reverse-mode differentiation, the
//! Adam optimiser, a central-difference gradient checker and a text
//! checkpoint format.
//!
//! Parameters live in a [`ParamStore`]. Each forward pass builds a fresh
//! [`Graph`] that copies in the parameters it touches; after
//! [`Graph::backward`] the per-parameter gradients are handed to
//! [`adam_step`].

mod adam;
mod checkpoint;
mod gradcheck;
mod graph;
mod params;
mod tensor;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use checkpoint::{load_params, read_params, save_params, write_params, CHECKPOINT_MAGIC};
pub use gradcheck::{grad_check, GradCheckReport};
pub use graph::{Gradients, Graph, Var};
pub use params::{ParamId, ParamStore};
pub use tensor::Tensor;
