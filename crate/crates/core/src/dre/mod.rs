//! Density ratio estimation with a probabilistic dataset classifier.
//!
//! The classifier separates reference points (`Y = 1`) from biased points
//! (`Y = 0`). Training uses class-balanced minibatches, so the network output
//! is a log-odds under equal class priors, i.e. an estimate of
//! `log p_ref(x)/p_bias(x)`. [`RatioClassifier::predict_prob`] shifts it to
//! the dataset prior `γ = |D_bias|/|D_ref|`, and the importance weight is
//! `γ c(Y=1|x) / c(Y=0|x)`.

mod calibration;

pub use calibration::{
    calibration_curve, calibration_report, fit_platt, platt_recalibrate, roc_auc, CalibrationBin, CalibrationReport,
    Platt,
};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::nnet::{self, sigmoid, softplus, Activation, Example, MlpParams, OptimizerState};
use crate::rng::{self, streams};
use crate::synthdata::TrainingView;

/// Probabilities are clamped to `[ε, 1 - ε]` before taking odds.
pub const PROB_CLAMP: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightEstimate {
    pub value: f64,
    /// The probability hit the clamp.
    pub clamped: bool,
}

/// Anything that can produce `ŵ(x) ≈ p_ref(x) / p_bias(x)`.
pub trait DensityRatio {
    fn importance_weight(&self, x: &[f64]) -> Result<WeightEstimate>;
}

/// `γ p / (1 - p)` after clamping `p`.
pub fn weight_from_probability(p: f64, gamma: f64) -> WeightEstimate {
    let clamped_p = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
    WeightEstimate {
        value: gamma * clamped_p / (1.0 - clamped_p),
        clamped: clamped_p != p,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierHyper {
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub val_fraction: f64,
    pub seed: u64,
}

impl Default for ClassifierHyper {
    fn default() -> Self {
        Self {
            hidden: vec![16, 16],
            activation: Activation::Tanh,
            lr: 3e-3,
            epochs: 20,
            batch_size: 64,
            val_fraction: 0.2,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: usize,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub final_train_loss: f64,
    pub history: Vec<EpochRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioClassifier {
    pub net: MlpParams,
    pub gamma: f64,
    pub platt: Option<Platt>,
    /// Drop the prior factor from the weight, giving `c / (1 - c)`.
    #[serde(default)]
    pub omit_gamma: bool,
    #[serde(default)]
    pub train_report: TrainReport,
}

impl RatioClassifier {
    pub fn new(net: MlpParams, gamma: f64) -> Result<Self> {
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(invalid("gamma", "must be positive and finite"));
        }
        if net.output_dim() != 1 {
            return Err(invalid("net", "ratio classifier needs a logit head"));
        }
        Ok(Self {
            net,
            gamma,
            platt: None,
            omit_gamma: false,
            train_report: TrainReport::default(),
        })
    }

    /// Raw network output: log-odds of `Y = 1` under equal priors.
    pub fn raw_score(&self, x: &[f64]) -> Result<f64> {
        self.net.logit(x)
    }

    /// Raw score after Platt recalibration, if any.
    pub fn balanced_logit(&self, x: &[f64]) -> Result<f64> {
        let s = self.raw_score(x)?;
        Ok(match self.platt {
            Some(p) => p.apply(s),
            None => s,
        })
    }

    /// Log-odds of `Y = 1` under the class prior `p(Y=0)/p(Y=1) = gamma`.
    pub fn logit_at_prior(&self, x: &[f64], gamma: f64) -> Result<f64> {
        Ok(self.balanced_logit(x)? - gamma.ln())
    }

    /// `c(Y = 1 | x)` under the training datasets' prior.
    pub fn predict_prob(&self, x: &[f64]) -> Result<f64> {
        Ok(sigmoid(self.logit_at_prior(x, self.gamma)?))
    }
}

impl DensityRatio for RatioClassifier {
    fn importance_weight(&self, x: &[f64]) -> Result<WeightEstimate> {
        let p = self.predict_prob(x)?;
        let gamma = if self.omit_gamma { 1.0 } else { self.gamma };
        Ok(weight_from_probability(p, gamma))
    }
}

/// Seeded per-split holdout: each split keeps `round(val_fraction · n)`
/// points (at least one, leaving at least one for training).
pub fn holdout_split(view: &TrainingView, val_fraction: f64, seed: u64) -> Result<(TrainingView, TrainingView)> {
    if !(val_fraction > 0.0 && val_fraction <= 0.5) {
        return Err(invalid(
            "val_fraction",
            format!("must lie in (0, 0.5], got {val_fraction}"),
        ));
    }
    let mut r = rng::stream(seed, streams::HOLDOUT);
    let mut split = |points: &[Vec<f64>], name: &'static str| -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
        if points.len() < 2 {
            return Err(Error::EmptyData(name));
        }
        let n_val = ((val_fraction * points.len() as f64).round() as usize).clamp(1, points.len() - 1);
        let mut idx: Vec<usize> = (0..points.len()).collect();
        idx.shuffle(&mut r);
        let val = idx[..n_val].iter().map(|&i| points[i].clone()).collect();
        let train = idx[n_val..].iter().map(|&i| points[i].clone()).collect();
        Ok((train, val))
    };
    let (ref_train, ref_val) = split(&view.reference, "reference split needs at least 2 points")?;
    let (bias_train, bias_val) = split(&view.bias, "biased split needs at least 2 points")?;
    Ok((
        TrainingView::new(bias_train, ref_train)?,
        TrainingView::new(bias_val, ref_val)?,
    ))
}

/// Mean of the per-class average cross-entropies of the raw score.
pub fn balanced_loss(net: &MlpParams, view: &TrainingView) -> Result<f64> {
    let mean = |points: &[Vec<f64>], sign: f64| -> Result<f64> {
        let mut acc = 0.0;
        for x in points {
            acc += softplus(sign * net.logit(x)?);
        }
        Ok(acc / points.len() as f64)
    };
    Ok(0.5 * (mean(&view.reference, -1.0)? + mean(&view.bias, 1.0)?))
}

/// Draws the per-batch indices for one split: a fresh permutation if this is
/// the larger split, uniform draws with replacement otherwise.
struct IndexSource {
    n: usize,
    exhaustive: bool,
    order: Vec<usize>,
    cursor: usize,
}

impl IndexSource {
    fn new(n: usize, exhaustive: bool) -> Self {
        Self {
            n,
            exhaustive,
            order: (0..n).collect(),
            cursor: n,
        }
    }

    fn next(&mut self, r: &mut rng::Rng) -> usize {
        if !self.exhaustive {
            return r.random_range(0..self.n);
        }
        if self.cursor == self.n {
            self.order.shuffle(r);
            self.cursor = 0;
        }
        self.cursor += 1;
        self.order[self.cursor - 1]
    }
}

/// Learns a classifier separating `view.reference` (Y=1) from `view.bias`
/// (Y=0). Every minibatch holds equal counts from the two splits; the
/// epoch with the lowest balanced validation loss is kept.
pub fn train_classifier(view: &TrainingView, hyper: &ClassifierHyper) -> Result<RatioClassifier> {
    if view.bias.is_empty() || view.reference.is_empty() {
        return Err(Error::EmptyData("both splits must be non-empty"));
    }
    if hyper.batch_size < 2 || hyper.epochs == 0 {
        return Err(invalid("hyper", "need batch_size >= 2 and epochs >= 1"));
    }
    let d = view.dim().expect("non-empty");
    let (train, val) = holdout_split(view, hyper.val_fraction, hyper.seed)?;
    let mut sizes = vec![d];
    sizes.extend(&hyper.hidden);
    sizes.push(1);
    let mut net = nnet::init(&sizes, hyper.activation, hyper.seed)?;
    let mut opt = OptimizerState::adam(hyper.lr, &net);
    let mut r = rng::stream(hyper.seed, streams::BATCHES);

    let half = hyper.batch_size / 2;
    let n_ref = train.reference.len();
    let n_bias = train.bias.len();
    let larger = n_ref.max(n_bias);
    let mut ref_src = IndexSource::new(n_ref, n_ref == larger);
    let mut bias_src = IndexSource::new(n_bias, n_bias == larger);
    let batches = larger.div_ceil(half);

    let mut best = (f64::INFINITY, 0usize, net.clone());
    let mut history = Vec::with_capacity(hyper.epochs);
    let mut batch_idx: Vec<(usize, f64)> = Vec::with_capacity(2 * half);
    for epoch in 0..hyper.epochs {
        for b in 0..batches {
            batch_idx.clear();
            for _ in 0..half {
                batch_idx.push((ref_src.next(&mut r), 1.0));
                batch_idx.push((bias_src.next(&mut r), 0.0));
            }
            let examples: Vec<Example> = batch_idx
                .iter()
                .map(|&(i, y)| Example {
                    x: if y == 1.0 { &train.reference[i] } else { &train.bias[i] },
                    y,
                    weight: 1.0,
                })
                .collect();
            let (loss, grads) = nnet::weighted_bce_grad(&net, &examples)?;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, batch: b });
            }
            nnet::step(&mut net, &grads, &mut opt)?;
        }
        let train_loss = balanced_loss(&net, &train)?;
        let val_loss = balanced_loss(&net, &val)?;
        if !val_loss.is_finite() {
            return Err(Error::NonFiniteLoss { epoch, batch: batches });
        }
        history.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
        });
        if val_loss < best.0 {
            best = (val_loss, epoch, net.clone());
        }
    }
    let mut clf = RatioClassifier::new(best.2, view.gamma)?;
    clf.train_report = TrainReport {
        epochs: hyper.epochs,
        best_epoch: best.1,
        best_val_loss: best.0,
        final_train_loss: history.last().map_or(f64::NAN, |h| h.train_loss),
        history,
    };
    Ok(clf)
}

/// Cross-entropy `(1/(γ+1)) E_ref[-log c] + (γ/(γ+1)) E_bias[-log(1-c)]`
/// with `c` taken at the evaluation set's own prior `γ`.
pub fn empirical_nce(clf: &RatioClassifier, eval: &TrainingView) -> Result<f64> {
    if eval.bias.is_empty() || eval.reference.is_empty() {
        return Err(Error::EmptyData("evaluation splits must be non-empty"));
    }
    let g = eval.gamma;
    let mean = |points: &[Vec<f64>], sign: f64| -> Result<f64> {
        let mut acc = 0.0;
        for x in points {
            acc += softplus(sign * clf.logit_at_prior(x, g)?);
        }
        Ok(acc / points.len() as f64)
    };
    let ref_loss = mean(&eval.reference, -1.0)?;
    let bias_loss = mean(&eval.bias, 1.0)?;
    Ok(ref_loss / (g + 1.0) + g / (g + 1.0) * bias_loss)
}

/// Weights for a batch of points plus the number of clamp events.
pub fn importance_weights<W: DensityRatio + ?Sized>(weighter: &W, xs: &[Vec<f64>]) -> Result<(Vec<f64>, usize)> {
    let mut clamped = 0;
    let mut out = Vec::with_capacity(xs.len());
    for x in xs {
        let w = weighter.importance_weight(x)?;
        clamped += usize::from(w.clamped);
        out.push(w.value);
    }
    Ok((out, clamped))
}

/// In-batch mean normalization `ŵ_i · |B| / Σ_B ŵ`. No-op on an all-zero batch.
pub fn normalize_in_batch(weights: &mut [f64]) {
    let total: f64 = weights.iter().sum();
    if total > 0.0 {
        let scale = weights.len() as f64 / total;
        weights.iter_mut().for_each(|w| *w *= scale);
    }
}
