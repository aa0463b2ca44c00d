//! Command-line pipeline around `gramscore-core`: dataset files, the
//! pseudo-label cache, the live LLM client, model files and the experiment
//! commands.

pub use gramscore_core as core;

pub mod cache;
pub mod config;
#[cfg(feature = "encoder")]
pub mod encoder;
pub mod io;
pub mod label;
pub mod live;
pub mod output;
pub mod pipeline;
pub mod plot;
pub mod snapshot;
