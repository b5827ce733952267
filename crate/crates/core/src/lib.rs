//! Curriculum coarse-to-fine coreset selection.
//!
//! Given a labeled dataset, per-sample difficulty scores, and an optional
//! distilled (synthetic) subset, this crate iteratively trains a filter
//! classifier on the current synthetic set, harvests the simplest
//! misclassified real samples, and emits a budgeted coreset plus per-phase
//! diagnostics.
//!
//! Modules:
//! - [`data`]: dataset ingestion (CIFAR-10 binary, IDX, packed tensor files),
//!   toy blob generation, per-class indexing.
//! - [`nnet`]: from-scratch differentiable classifiers (linear / MLP / small
//!   CNN) and a deterministic SGD trainer.
//! - [`scores`]: difficulty scores — forgetting events, filter-logit
//!   difficulty, and external score files.
//! - [`select`]: window initialization, coarse filtering, fine selection,
//!   phase budgets, and the curriculum driver.
//! - [`pipeline`]: end-to-end runs, the three-setting analysis experiment,
//!   coreset evaluation, phase analytics, external predictions, manifests.
//! - [`config`]: the typed run configuration and its text format.

pub mod config;
pub mod data;
mod error;
pub mod nnet;
pub mod pipeline;
pub mod scores;
pub mod select;
pub mod textfmt;

pub use error::{Error, Result};
