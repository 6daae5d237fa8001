use serde::{Deserialize, Serialize};

use super::{fit_shared_covariance, fit_weighted_gmm, GenerativeModel, GmmConfig, GmmModel, WeightedDataset};
use crate::error::{Error, Result};
use crate::synthdata::TrainingView;

/// Pooled data, every weight 1.
pub fn fit_equi_weight(view: &TrainingView, cfg: &GmmConfig) -> Result<GmmModel> {
    fit_weighted_gmm(&WeightedDataset::equi_weight(view), cfg)
}

/// Reference split only.
pub fn fit_reference_only(view: &TrainingView, cfg: &GmmConfig) -> Result<GmmModel> {
    if view.reference.is_empty() {
        return Err(Error::EmptyData("reference split"));
    }
    GmmModel::fit(&view.reference, &vec![1.0; view.reference.len()], cfg)
}

/// One mixture per dataset label; sampling conditions on the reference label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionalGmm {
    pub bias: GmmModel,
    pub reference: GmmModel,
}

impl ConditionalGmm {
    pub fn for_label(&self, y: u8) -> &GmmModel {
        if y == 1 {
            &self.reference
        } else {
            &self.bias
        }
    }
}

impl GenerativeModel for ConditionalGmm {
    fn dim(&self) -> usize {
        self.reference.dim()
    }

    fn sample(&self, n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
        self.reference.sample(n, seed)
    }
}

/// Fits `p(x | y)` for both labels jointly; `cfg.covariance` decides
/// whether the labels share one covariance.
pub fn fit_conditional(view: &TrainingView, cfg: &GmmConfig) -> Result<ConditionalGmm> {
    if view.reference.is_empty() {
        return Err(Error::EmptyData("reference split"));
    }
    if view.bias.is_empty() {
        return Err(Error::EmptyData("biased split"));
    }
    let wb = vec![1.0; view.bias.len()];
    let wr = vec![1.0; view.reference.len()];
    let mut fits = fit_shared_covariance(&[(&view.bias, &wb), (&view.reference, &wr)], cfg)?;
    let reference = fits.pop().expect("two groups");
    let bias = fits.pop().expect("two groups");
    Ok(ConditionalGmm { bias, reference })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthdata::{build_splits, SubgroupSpec};

    #[test]
    fn baselines_fit_and_sample_from_reference() {
        let spec = SubgroupSpec::single_attribute(0.9).unwrap();
        let view = build_splits(&spec, 1000, 0.5, 0).unwrap().training_view();
        let cfg = GmmConfig::default();
        let eq = fit_equi_weight(&view, &cfg).unwrap();
        let ro = fit_reference_only(&view, &cfg).unwrap();
        let cond = fit_conditional(&view, &cfg).unwrap();
        let neg_mass = |m: &GmmModel| -> f64 {
            m.weights
                .iter()
                .zip(m.means())
                .filter(|(_, mu)| mu[0] < 0.0)
                .map(|(w, _)| w)
                .sum()
        };
        // pooled: (900 + 250) / 1500
        assert!((neg_mass(&eq) - 1150.0 / 1500.0).abs() < 0.01);
        assert!((neg_mass(&ro) - 0.5).abs() < 0.01);
        assert!((neg_mass(&cond.reference) - 0.5).abs() < 0.01);
        assert!((neg_mass(&cond.bias) - 0.9).abs() < 0.01);
        assert_eq!(cond.sample(20, 1).unwrap(), cond.reference.sample(20, 1).unwrap());
    }

    #[test]
    fn empty_reference_is_rejected() {
        let view = TrainingView {
            bias: vec![vec![0.0]; 4],
            reference: Vec::new(),
            gamma: 1.0,
        };
        assert!(fit_reference_only(&view, &GmmConfig::default()).is_err());
        assert!(fit_conditional(&view, &GmmConfig::default()).is_err());
    }
}
