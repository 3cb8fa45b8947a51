//! Physics-informed kernel distribution embeddings.
//!
//! Conditional expectations `E[c(y) | x, u]` are estimated from a sample of
//! observed transitions together with an approximate dynamics model. The
//! data only has to explain the model's error, so far fewer samples are
//! needed than for a purely data-driven embedding, and predictions fall
//! back to the model outside the sampled region.
//!
//! Modules:
//!
//! - [`kernel`]: Gaussian and constant kernels, Gram matrices.
//! - [`embedding`]: fitting and evaluating embeddings.
//! - [`dynamics`]: spring-mass-damper and unicycle benchmark systems.
//! - [`control`]: one-step stochastic policies over a finite action set.
//! - [`experiments`]: seeded studies and their reports.
//! - [`io`]: CSV/JSON formats for datasets, embeddings and reports.

pub mod config;
pub mod control;
pub mod dynamics;
pub mod embedding;
pub mod error;
pub mod experiments;
pub mod io;
pub mod kernel;
pub mod points;

pub use embedding::{CostFunction, EmbeddingMode, FittedEmbedding, PriorModel, TransitionDataset};
pub use error::{PikeError, Result};
pub use kernel::KernelSpec;
pub use points::Points;
