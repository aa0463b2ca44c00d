//! Core algorithms for zero-shot grammar scoring with noisy pseudo-labels.
//!
//! The crate is `no_std` (it needs `alloc`) and carries no IO. It provides:
//!
//! - [`dataset`]: samples, expert ratings, split checks and score histograms.
//! - [`prompt`]: rubric prompts, score parsing, the [`prompt::LlmClient`]
//!   contract and a deterministic offline [`prompt::MockClient`].
//! - [`model`]: the [`model::RegressionModel`] contract and a featurizer-based
//!   linear regressor.
//! - [`trainer`]: the small-loss sample reweighting training loop.
//! - [`metrics`]: QWK, Pearson, Spearman and RMSE agreement metrics.
//! - [`inject`]: seeded grammatical error injection and robustness tables.
//! - [`synth`]: a template-based synthetic corpus with known true scores.
//!
//! File formats, caching, the live LLM client, the transformer encoder
//! backend and the command line live in the companion `gramscore` crate.

#![no_std]

extern crate alloc;
#[cfg(any(feature = "std", test))]
extern crate std;

pub mod dataset;
pub mod error;
pub mod inject;
pub mod lexicon;
pub mod markers;
pub mod metrics;
pub mod model;
pub mod prompt;
pub mod synth;
pub mod text;
pub mod trainer;

pub use error::{Error, Result};
