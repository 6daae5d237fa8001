//! Evaluation: attribute marginals and the fairness discrepancy, a data-space
//! Fréchet distance, per-subgroup weight summaries, and a downstream
//! demographic-parity task.

mod downstream;
mod fairness;
mod frechet;
mod histogram;

pub use downstream::{
    accuracy, demographic_parity, downstream_dp_distance, fit_logistic, DownstreamReport, LogisticHyper, TaskExample,
    TaskLabeler,
};
pub use fairness::{attribute_marginal, fairness_discrepancy, AttributeRule, MarginalVector};
pub use frechet::{balanced_reference_moments, frechet_distance, GaussianMoments, PSD_TOL};
pub use histogram::{weight_histogram_by_subgroup, HistogramBin, SubgroupWeightSummary};
