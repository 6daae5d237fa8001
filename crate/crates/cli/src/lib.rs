//! Experiment runner and reproduction harness for `fairweight`.
//!
//! - [`config`]: JSON experiment documents with field-path validation.
//! - [`runner`]: the (method, perc, α, seed) grid, artifacts and manifests.
//! - [`table1`]: Bayes versus learned classifier cross-entropy.
//! - [`toy`]: learned versus Bayes density ratios on a 1-D mixture.
//! - [`summarize`]: median and IQR tables over seeds.

pub mod config;
pub mod error;
pub mod runner;
pub mod summarize;
pub mod table1;
pub mod toy;

pub use config::{ExperimentConfig, Method, ModelFamily, WeightSource};
pub use error::{CliError, ErrorReport, Result};
