//! Generative models trained on the importance-weighted pooled dataset.
//!
//! The pooled dataset is `D_bias ∪ D_ref` with `ŵ(x)^α` on biased points
//! and unit weight on reference points. The main model family is a Gaussian
//! mixture fit by weighted EM, which maximizes `Σ ŵ_i log p_θ(x_i)`; a small
//! hinge-loss GAN is provided as a second family.

mod baselines;
mod gan;
mod gmm;
mod matching;

pub use baselines::{fit_conditional, fit_equi_weight, fit_reference_only, ConditionalGmm};
pub use gan::{fit_weighted_gan, GanHyper, GanLogRecord, GanModel};
pub use gmm::{fit_shared_covariance, fit_weighted_gmm, CovarianceMode, FitRecord, GmmConfig, GmmModel, COV_FLOOR};
pub use matching::{match_components, mean_estimation_error, subgroup_masses};

use serde::{Deserialize, Serialize};

use crate::dre::{importance_weights, DensityRatio};
use crate::error::{invalid, Error, Result};
use crate::synthdata::TrainingView;

/// Pooled points with per-point weights and origin tags (0 biased, 1 reference).
/// Biased points come first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedDataset {
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub origins: Vec<u8>,
    /// Clamp events while computing the weights.
    pub clamped: usize,
}

impl WeightedDataset {
    pub fn new(points: Vec<Vec<f64>>, weights: Vec<f64>, origins: Vec<u8>) -> Result<Self> {
        if points.len() != weights.len() || points.len() != origins.len() {
            return Err(Error::DimensionMismatch {
                expected: points.len(),
                got: weights.len().min(origins.len()),
            });
        }
        for (&w, &y) in weights.iter().zip(&origins) {
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::NonFinite("importance weight"));
            }
            if y > 1 {
                return Err(invalid("origins", "tags must be 0 or 1"));
            }
            if y == 1 && w != 1.0 {
                return Err(invalid("weights", "reference points must carry unit weight"));
            }
        }
        Ok(Self {
            points,
            weights,
            origins,
            clamped: 0,
        })
    }

    /// Pooled dataset with all weights 1.
    pub fn equi_weight(view: &TrainingView) -> Self {
        let (points, origins) = pooled(view);
        let n = points.len();
        Self {
            points,
            weights: vec![1.0; n],
            origins,
            clamped: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn dim(&self) -> Option<usize> {
        self.points.first().map(Vec::len)
    }

    /// Every weight multiplied by `c`; breaks the unit-reference invariant
    /// on purpose, for scale-invariance checks.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            weights: self.weights.iter().map(|w| w * c).collect(),
            ..self.clone()
        }
    }
}

fn pooled(view: &TrainingView) -> (Vec<Vec<f64>>, Vec<u8>) {
    let points: Vec<Vec<f64>> = view.bias.iter().chain(&view.reference).cloned().collect();
    let origins = std::iter::repeat_n(0u8, view.bias.len())
        .chain(std::iter::repeat_n(1u8, view.reference.len()))
        .collect();
    (points, origins)
}

/// `ŵ(x)^α` on biased points, 1 on reference points.
pub fn assign_weights<W: DensityRatio + ?Sized>(
    view: &TrainingView,
    weighter: &W,
    alpha: f64,
) -> Result<WeightedDataset> {
    if !(alpha.is_finite() && alpha >= 0.0) {
        return Err(invalid("alpha", "must be finite and nonnegative"));
    }
    let (raw, clamped) = importance_weights(weighter, &view.bias)?;
    let mut weights: Vec<f64> = raw.into_iter().map(|w| w.powf(alpha)).collect();
    if weights.iter().any(|w| !w.is_finite()) {
        return Err(Error::NonFinite("importance weight"));
    }
    weights.extend(std::iter::repeat_n(1.0, view.reference.len()));
    let (points, origins) = pooled(view);
    let mut wd = WeightedDataset::new(points, weights, origins)?;
    wd.clamped = clamped;
    Ok(wd)
}

/// A model that can draw samples.
pub trait GenerativeModel {
    fn dim(&self) -> usize;
    fn sample(&self, n: usize, seed: u64) -> Result<Vec<Vec<f64>>>;
}

pub fn sample_model<M: GenerativeModel + ?Sized>(model: &M, n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    model.sample(n, seed)
}
