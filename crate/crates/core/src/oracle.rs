//! Bayes-optimal dataset classifier and its cross-entropy.
//!
//! When the subgroup components have disjoint supports, the density ratio
//! `p_bias(x)/p_ref(x)` equals `b(z)` for the subgroup containing `x`, so
//! the optimal classifier is `c*(Y=1|x) = 1 / (γ b(z) + 1)` and its
//! cross-entropy is a finite sum over subgroups.

use serde::{Deserialize, Serialize};

use crate::dre::{DensityRatio, WeightEstimate};
use crate::error::{invalid, Error, Result};
use crate::nnet::softplus;
use crate::synthdata::{self, SubgroupSpec, Which};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasConfig {
    pub p_ref: Vec<f64>,
    pub p_bias: Vec<f64>,
    pub gamma: f64,
}

impl BiasConfig {
    pub fn new(p_ref: Vec<f64>, p_bias: Vec<f64>, gamma: f64) -> Result<Self> {
        if p_ref.len() != p_bias.len() {
            return Err(Error::DimensionMismatch {
                expected: p_ref.len(),
                got: p_bias.len(),
            });
        }
        for (name, p) in [("p_ref", &p_ref), ("p_bias", &p_bias)] {
            let total: f64 = p.iter().sum();
            if p.iter().any(|v| !(v.is_finite() && *v >= 0.0)) || (total - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidProbabilities {
                    name,
                    reason: "entries must be nonnegative and sum to 1".into(),
                });
            }
        }
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(invalid("gamma", "must be positive and finite"));
        }
        Ok(Self { p_ref, p_bias, gamma })
    }

    pub fn from_spec(spec: &SubgroupSpec, gamma: f64) -> Result<Self> {
        Self::new(spec.p_ref().to_vec(), spec.p_bias().to_vec(), gamma)
    }

    pub fn n_subgroups(&self) -> usize {
        self.p_ref.len()
    }

    pub fn b(&self, k: usize) -> Result<f64> {
        if self.p_ref[k] == 0.0 {
            if self.p_bias[k] > 0.0 {
                return Err(Error::UndefinedRatio(k));
            }
            // subgroup absent from both marginals; contributes nothing
            return Ok(1.0);
        }
        Ok(self.p_bias[k] / self.p_ref[k])
    }

    /// `c*(Y=1 | x)` for any `x` in subgroup `k`.
    pub fn bayes_posterior(&self, k: usize) -> Result<f64> {
        Ok(1.0 / (self.gamma * self.b(k)? + 1.0))
    }

    /// Cross-entropy loss (`-NCE`) of the Bayes-optimal classifier.
    pub fn bayes_ce(&self) -> Result<f64> {
        let g = self.gamma;
        let mut ref_term = 0.0;
        let mut bias_term = 0.0;
        for k in 0..self.n_subgroups() {
            let gb = g * self.b(k)?;
            if self.p_ref[k] > 0.0 {
                // -log(1 / (γb + 1))
                ref_term += self.p_ref[k] * gb.ln_1p();
            }
            if self.p_bias[k] > 0.0 {
                // -log(γb / (γb + 1)); b > 0 here since p_bias > 0
                bias_term += self.p_bias[k] * ((1.0 / gb).ln_1p());
            }
        }
        Ok(ref_term / (g + 1.0) + g / (g + 1.0) * bias_term)
    }

    /// Cross-entropy of a classifier that outputs `q[k]` on subgroup `k`.
    pub fn subgroup_constant_ce(&self, q: &[f64]) -> Result<f64> {
        if q.len() != self.n_subgroups() {
            return Err(Error::DimensionMismatch {
                expected: self.n_subgroups(),
                got: q.len(),
            });
        }
        let g = self.gamma;
        let mut ref_term = 0.0;
        let mut bias_term = 0.0;
        for k in 0..q.len() {
            if self.p_ref[k] > 0.0 {
                ref_term -= self.p_ref[k] * q[k].ln();
            }
            if self.p_bias[k] > 0.0 {
                bias_term -= self.p_bias[k] * (-q[k]).ln_1p();
            }
        }
        Ok(ref_term / (g + 1.0) + g / (g + 1.0) * bias_term)
    }
}

/// `c*(Y=1 | x) = 1 / (γ r(x) + 1)` with the exact mixture ratio `r`,
/// valid under overlap as well.
pub fn bayes_probability(spec: &SubgroupSpec, gamma: f64, x: &[f64]) -> Result<f64> {
    let lr = gamma.ln() + spec.log_bayes_ratio(x)?;
    Ok(crate::nnet::sigmoid(-lr))
}

/// Monte Carlo cross-entropy of the pointwise Bayes classifier, averaging
/// over `n` draws from each distribution.
pub fn bayes_ce_monte_carlo(spec: &SubgroupSpec, gamma: f64, n: usize, seed: u64) -> Result<f64> {
    if n == 0 {
        return Err(invalid("n", "need at least one sample"));
    }
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(invalid("gamma", "must be positive and finite"));
    }
    let lg = gamma.ln();
    let mean = |which: Which, sign: f64| -> Result<f64> {
        let pts = synthdata::sample(spec, which, n, seed);
        let mut acc = 0.0;
        for p in &pts {
            // γ r(x) in log space; -log c* = softplus(l), -log(1 - c*) = softplus(-l)
            let l = lg + spec.log_bayes_ratio(&p.x)?;
            acc += softplus(sign * l);
        }
        Ok(acc / n as f64)
    };
    let ref_loss = mean(Which::Ref, 1.0)?;
    let bias_loss = mean(Which::Bias, -1.0)?;
    Ok(ref_loss / (gamma + 1.0) + gamma / (gamma + 1.0) * bias_loss)
}

/// Closed form next to Monte Carlo, with the overlap diagnostics that tell
/// whether the closed form is expected to hold.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NceComparison {
    pub closed_form: f64,
    pub monte_carlo: f64,
    pub gap: f64,
    pub max_overlap: f64,
    pub disjoint: bool,
}

pub fn compare_with_closed_form(spec: &SubgroupSpec, gamma: f64, n: usize, seed: u64) -> Result<NceComparison> {
    let closed_form = BiasConfig::from_spec(spec, gamma)?.bayes_ce()?;
    let monte_carlo = bayes_ce_monte_carlo(spec, gamma, n, seed)?;
    let overlap = spec.disjointness_check(synthdata::DEFAULT_OVERLAP_THRESHOLD)?;
    Ok(NceComparison {
        closed_form,
        monte_carlo,
        gap: monte_carlo - closed_form,
        max_overlap: overlap.max_overlap,
        disjoint: overlap.disjoint,
    })
}

/// Exact importance weights `p_ref(x) / p_bias(x)` from the generating spec.
#[derive(Debug, Clone, Copy)]
pub struct BayesWeights<'a> {
    pub spec: &'a SubgroupSpec,
}

impl DensityRatio for BayesWeights<'_> {
    fn importance_weight(&self, x: &[f64]) -> Result<WeightEstimate> {
        Ok(WeightEstimate {
            value: (-self.spec.log_bayes_ratio(x)?).exp(),
            clamped: false,
        })
    }
}
