//! Matrix product state (MPS) classifiers with gauge-fixing canonical forms,
//! plus a shadow-training harness that measures how much information about a
//! training set leaks through trained model parameters.
//!
//! The crate is organized bottom-up:
//!
//! - [`tensor`]: dense real tensors and the numerical kernels (contraction,
//!   SVD, inversion) everything else builds on.
//! - [`mps`]: the MPS classifier itself — feature embedding, efficient
//!   forward evaluation, full materialization, and gauge transformations.
//! - [`canonical`]: gauge fixing. The SVD-based left-canonical form and the
//!   univocal skeleton canonical form that collapses every gauge orbit to a
//!   single representative.
//! - [`neural`]: a small feedforward-network baseline with exact
//!   backpropagation, including the two-weight toy model that demonstrates
//!   the irrelevant-feature leak.
//! - [`train`]: cross-entropy loss, Adam, analytic MPS gradients, and seeded
//!   training loops for both architectures.
//! - [`data`]: dataset representation, the toy generator, a
//!   correlation-calibrated synthetic surrogate of the medical-records
//!   dataset, imbalance sampling, and CSV ingestion.
//! - [`attack`]: the shadow-training pipeline — mass-train victim models on
//!   biased datasets, train meta-classifiers on their flattened parameters,
//!   report attack accuracy with confidence bands.

pub mod attack;
pub mod canonical;
pub mod data;
pub mod mps;
pub mod neural;
pub mod seed;
pub mod tensor;
pub mod train;

pub use tensor::{Tensor, TensorError};
