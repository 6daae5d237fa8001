use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::nnet::{init, sigmoid, step, weighted_bce_grad, Activation, Example, MlpParams, OptimizerState};
use crate::rng::{self, streams};

/// A point with its binary task label `t` and binary sensitive attribute `u`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskExample {
    pub x: Vec<f64>,
    pub u: usize,
    pub t: u8,
}

/// `P(t = 1 | x, u) = σ(slope_u · x[feature] + offset_u)`. Unequal entries
/// across `u` make the task depend on the attribute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskLabeler {
    pub feature: usize,
    pub slopes: [f64; 2],
    pub offsets: [f64; 2],
}

impl Default for TaskLabeler {
    fn default() -> Self {
        Self {
            feature: 1,
            slopes: [3.0, 0.0],
            offsets: [0.0, 1.5],
        }
    }
}

impl TaskLabeler {
    /// Same rule for both attribute values.
    pub fn attribute_independent(slope: f64, offset: f64) -> Self {
        Self {
            feature: 1,
            slopes: [slope; 2],
            offsets: [offset; 2],
        }
    }

    pub fn probability(&self, x: &[f64], u: usize) -> Result<f64> {
        if u > 1 {
            return Err(invalid("u", "sensitive attribute must be binary"));
        }
        let v = *x.get(self.feature).ok_or(Error::DimensionMismatch {
            expected: self.feature + 1,
            got: x.len(),
        })?;
        Ok(sigmoid(self.slopes[u] * v + self.offsets[u]))
    }

    pub fn label(&self, xs: &[Vec<f64>], us: &[usize], seed: u64) -> Result<Vec<TaskExample>> {
        if xs.len() != us.len() {
            return Err(Error::DimensionMismatch {
                expected: xs.len(),
                got: us.len(),
            });
        }
        let mut r = rng::stream(seed, streams::LABELS);
        xs.iter()
            .zip(us)
            .map(|(x, &u)| {
                let p = self.probability(x, u)?;
                Ok(TaskExample {
                    x: x.clone(),
                    u,
                    t: u8::from(r.random::<f64>() < p),
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogisticHyper {
    pub lr: f64,
    pub iterations: usize,
    pub seed: u64,
}

impl Default for LogisticHyper {
    fn default() -> Self {
        Self {
            lr: 0.05,
            iterations: 400,
            seed: 0,
        }
    }
}

/// Logistic regression by full-batch Adam on the mean cross-entropy.
pub fn fit_logistic(train: &[TaskExample], hyper: &LogisticHyper) -> Result<MlpParams> {
    let first = train.first().ok_or(Error::EmptyData("training set"))?;
    let pos = train.iter().filter(|e| e.t == 1).count();
    if pos == 0 || pos == train.len() {
        return Err(Error::Degenerate("training labels contain a single class".into()));
    }
    let mut net = init(&[first.x.len(), 1], Activation::Tanh, hyper.seed)?;
    let batch: Vec<Example> = train
        .iter()
        .map(|e| Example {
            x: &e.x,
            y: f64::from(e.t),
            weight: 1.0,
        })
        .collect();
    let mut opt = OptimizerState::adam(hyper.lr, &net);
    for _ in 0..hyper.iterations {
        let (_, grads) = weighted_bce_grad(&net, &batch)?;
        step(&mut net, &grads, &mut opt)?;
    }
    Ok(net)
}

fn predict(net: &MlpParams, x: &[f64]) -> Result<bool> {
    Ok(net.logit(x)? > 0.0)
}

/// `|P(ĉ = 1 | u = 0) − P(ĉ = 1 | u = 1)|` on `test`.
pub fn demographic_parity(net: &MlpParams, test: &[TaskExample]) -> Result<f64> {
    let mut pos = [0usize; 2];
    let mut n = [0usize; 2];
    for e in test {
        if e.u > 1 {
            return Err(invalid("u", "sensitive attribute must be binary"));
        }
        n[e.u] += 1;
        pos[e.u] += usize::from(predict(net, &e.x)?);
    }
    if n[0] == 0 || n[1] == 0 {
        return Err(Error::Degenerate("test set lacks one attribute value".into()));
    }
    Ok((pos[0] as f64 / n[0] as f64 - pos[1] as f64 / n[1] as f64).abs())
}

pub fn accuracy(net: &MlpParams, test: &[TaskExample]) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::EmptyData("test set"));
    }
    let mut hits = 0usize;
    for e in test {
        hits += usize::from(predict(net, &e.x)? == (e.t == 1));
    }
    Ok(hits as f64 / test.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DownstreamReport {
    pub accuracy: f64,
    pub dp_candidate: f64,
    pub dp_reference: f64,
    /// `|dp_candidate − dp_reference|`.
    pub delta_dp: f64,
}

/// Fits the candidate classifier on `candidate_train` and the reference
/// classifier on balanced `reference_train`, then compares their
/// demographic parity on `test`.
pub fn downstream_dp_distance(
    candidate_train: &[TaskExample],
    reference_train: &[TaskExample],
    test: &[TaskExample],
    hyper: &LogisticHyper,
) -> Result<DownstreamReport> {
    let cand = fit_logistic(candidate_train, hyper)?;
    let reference = fit_logistic(reference_train, hyper)?;
    let dp_candidate = demographic_parity(&cand, test)?;
    let dp_reference = demographic_parity(&reference, test)?;
    Ok(DownstreamReport {
        accuracy: accuracy(&cand, test)?,
        dp_candidate,
        dp_reference,
        delta_dp: (dp_candidate - dp_reference).abs(),
    })
}
