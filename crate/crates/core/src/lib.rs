//! Density-ratio reweighting for fair generative modeling on synthetic
//! latent-subgroup data.
//!
//! A probabilistic classifier separates a small reference dataset from a
//! large biased dataset; its odds give importance weights for the biased
//! points, and a weighted maximum-likelihood fit on the pooled data recovers
//! the reference subgroup proportions. The data are Gaussian mixtures with
//! known parameters, and each learned quantity has a closed-form oracle.
//!
//! Modules:
//! - [`synthdata`]: subgroup mixtures, biased/reference splits, analytic densities.
//! - [`nnet`]: small MLPs with hand-written backprop, optimizers, gradient checks.
//! - [`dre`]: ratio classifier training, importance weights, calibration.
//! - [`oracle`]: Bayes-optimal classifier and its cross-entropy.
//! - [`genmodel`]: weighted EM mixtures, baselines, and a small hinge-loss GAN.
//! - [`evalmetrics`]: fairness discrepancy, Fréchet distance, weight summaries,
//!   downstream demographic parity.

pub mod dre;
pub mod error;
pub mod evalmetrics;
pub mod gaussian;
pub mod genmodel;
pub mod io;
pub mod nnet;
pub mod oracle;
pub mod rng;
pub mod synthdata;

pub use error::{Error, Result};
