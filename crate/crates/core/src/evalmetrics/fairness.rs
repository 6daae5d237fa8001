use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::synthdata::SubgroupSpec;

/// A distribution over sensitive-attribute values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct MarginalVector(Vec<f64>);

impl MarginalVector {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        let total: f64 = p.iter().sum();
        if p.is_empty() || p.iter().any(|v| !(v.is_finite() && *v >= 0.0)) || (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidProbabilities {
                name: "marginal",
                reason: "entries must be nonnegative and sum to 1".into(),
            });
        }
        Ok(Self(p))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl TryFrom<Vec<f64>> for MarginalVector {
    type Error = Error;
    fn try_from(p: Vec<f64>) -> Result<Self> {
        Self::new(p)
    }
}

impl From<MarginalVector> for Vec<f64> {
    fn from(m: MarginalVector) -> Self {
        m.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttributeRule {
    /// Mean of the attribute posterior.
    Soft,
    /// Proportions after labeling each sample with its most probable value.
    Thresholded,
}

/// Monte Carlo estimate of `E_x[p(u | x)]` under the oracle attribute
/// posterior of `spec`.
pub fn attribute_marginal(spec: &SubgroupSpec, samples: &[Vec<f64>], rule: AttributeRule) -> Result<MarginalVector> {
    if samples.is_empty() {
        return Err(Error::EmptyData("samples"));
    }
    let k = spec.n_subgroups();
    let mut acc = vec![0.0; k];
    for x in samples {
        let post = spec.subgroup_posterior(x)?;
        match rule {
            AttributeRule::Soft => acc.iter_mut().zip(&post).for_each(|(a, p)| *a += p),
            AttributeRule::Thresholded => {
                let best = (0..k).max_by(|&a, &b| post[a].total_cmp(&post[b])).expect("k ≥ 1");
                acc[best] += 1.0;
            }
        }
    }
    let n = samples.len() as f64;
    let mut p: Vec<f64> = acc.into_iter().map(|a| a / n).collect();
    // posteriors sum to 1 only up to rounding
    let total: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= total);
    MarginalVector::new(p)
}

/// `‖m_ref − m_model‖₂`.
pub fn fairness_discrepancy(m_ref: &MarginalVector, m_model: &MarginalVector) -> Result<f64> {
    if m_ref.len() != m_model.len() {
        return Err(Error::DimensionMismatch {
            expected: m_ref.len(),
            got: m_model.len(),
        });
    }
    Ok(m_ref
        .as_slice()
        .iter()
        .zip(m_model.as_slice())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt())
}
