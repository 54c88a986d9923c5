//! Complexity-controllable question generation.
//!
//! The crate has two halves that share a data pipeline:
//!
//! * a training-free question **complexity estimator** built from five
//!   linguistic features (clauses, modifier relations, passage topic
//!   coherence, entity frequency, entity-to-answer distance), min-max
//!   normalisation and a calibrated threshold;
//! * a toy-scale **question generator**: BiLSTM encoders, additive
//!   attention, a pointer-generator output layer, and a mixture of experts
//!   that selects per-complexity soft-template elements through a noisy
//!   top-k gate. It is trained with hard-EM on a small reverse-mode
//!   autodiff core.
//!
//! See the `examples/` directory for one runnable program per capability.

pub mod annotation;
pub mod cli;
pub mod dataset;
pub mod error;
pub mod estimator;
pub mod evaluation;
pub mod model;
pub mod numerics;
pub mod training;

pub use error::{Error, Result};
