//! Learning from biased complementary labels.
//!
//! A complementary label names a class an instance does *not* belong to. When
//! annotators pick complementary labels with a class-dependent bias, the bias
//! is captured by a transition matrix `Q` with `Q[i][j] = P(Ȳ = j | Y = i)` and
//! a zero diagonal. This crate provides:
//!
//! * [`transition`]: construction, validation, sampling and serialization of `Q`
//! * [`model`]: softmax scorers with the `Qᵀ`-corrected loss and its gradient
//! * [`trainer`]: mini-batch SGD with momentum, weight decay and early stopping
//! * [`estimator`]: anchor-set estimation of `Q` from complementary data
//! * [`datakit`]: datasets, CSV/IDX loaders, synthetic blobs and label flipping
//! * [`oracle`]: brute-force verifiers on small discrete problems
//!
//! All numerical code is generic over [`Float`] (implemented for `f32` and
//! `f64`); the `*64` aliases below are what most callers want.

pub mod datakit;
pub mod error;
pub mod estimator;
pub mod float;
pub mod model;
pub mod oracle;
pub mod rng;
pub mod trainer;
pub mod transition;

pub use error::{Error, Result};
pub use float::Float;

pub type TransitionMatrix64 = transition::TransitionMatrix<f64>;
pub type TransitionMatrix32 = transition::TransitionMatrix<f32>;
pub type SoftmaxModel64 = model::SoftmaxModel<f64>;
pub type SoftmaxModel32 = model::SoftmaxModel<f32>;
pub type LabeledDataset64 = datakit::LabeledDataset<f64>;
pub type LabeledDataset32 = datakit::LabeledDataset<f32>;
pub type CompDataset64 = datakit::CompDataset<f64>;
pub type CompDataset32 = datakit::CompDataset<f32>;
pub type AnchorSet64 = estimator::AnchorSet<f64>;
pub type QEstimate64 = estimator::QEstimate<f64>;
pub type DiscreteProblem64 = oracle::DiscreteProblem<f64>;
