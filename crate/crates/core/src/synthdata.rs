//! Latent-subgroup mixtures and controlled biased/reference splits.
//!
//! A [`SubgroupSpec`] assigns each subgroup a Gaussian component and two
//! marginals: `p_ref` for the reference distribution and `p_bias` for the
//! biased one. Both distributions share the per-subgroup components, so the
//! density ratio between them depends on `x` only through the subgroup when
//! components do not overlap. All densities are evaluated in log space.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::gaussian::{log_sum_exp, Gaussian};
use crate::rng::{self, streams};

pub const MAX_SUBGROUPS: usize = 8;
/// Pairwise Bhattacharyya overlap below which components count as disjoint.
pub const DEFAULT_OVERLAP_THRESHOLD: f64 = 1e-3;
const MARGINAL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Which {
    Bias,
    Ref,
}

impl Which {
    /// Dataset tag: 0 for the biased split, 1 for the reference split.
    pub fn tag(self) -> u8 {
        match self {
            Which::Bias => 0,
            Which::Ref => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpecDoc", into = "SpecDoc")]
pub struct SubgroupSpec {
    names: Vec<String>,
    components: Vec<Gaussian>,
    p_ref: Vec<f64>,
    p_bias: Vec<f64>,
}

/// On-disk form: means as nested arrays, covariances row-major per subgroup.
#[derive(Serialize, Deserialize)]
struct SpecDoc {
    subgroups: Vec<String>,
    means: Vec<Vec<f64>>,
    covariances: Vec<Vec<f64>>,
    p_ref: Vec<f64>,
    p_bias: Vec<f64>,
}

impl TryFrom<SpecDoc> for SubgroupSpec {
    type Error = Error;
    fn try_from(doc: SpecDoc) -> Result<Self> {
        if doc.means.len() != doc.covariances.len() {
            return Err(Error::DimensionMismatch {
                expected: doc.means.len(),
                got: doc.covariances.len(),
            });
        }
        let components = doc
            .means
            .into_iter()
            .zip(doc.covariances)
            .map(|(m, c)| Gaussian::new(m, c))
            .collect::<Result<Vec<_>>>()?;
        SubgroupSpec::new(doc.subgroups, components, doc.p_ref, doc.p_bias)
    }
}

impl From<SubgroupSpec> for SpecDoc {
    fn from(spec: SubgroupSpec) -> Self {
        SpecDoc {
            subgroups: spec.names,
            means: spec.components.iter().map(|c| c.mean().to_vec()).collect(),
            covariances: spec.components.iter().map(|c| c.covariance().to_vec()).collect(),
            p_ref: spec.p_ref,
            p_bias: spec.p_bias,
        }
    }
}

fn check_marginal(name: &'static str, p: &[f64], k: usize) -> Result<()> {
    if p.len() != k {
        return Err(Error::InvalidProbabilities {
            name,
            reason: format!("expected {k} entries, got {}", p.len()),
        });
    }
    if p.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::InvalidProbabilities {
            name,
            reason: "entries must be finite and nonnegative".into(),
        });
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > MARGINAL_TOL {
        return Err(Error::InvalidProbabilities {
            name,
            reason: format!("entries sum to {total}, not 1"),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OverlapReport {
    pub max_overlap: f64,
    pub pair: Option<(usize, usize)>,
    pub threshold: f64,
    pub disjoint: bool,
}

impl SubgroupSpec {
    pub fn new(names: Vec<String>, components: Vec<Gaussian>, p_ref: Vec<f64>, p_bias: Vec<f64>) -> Result<Self> {
        let k = components.len();
        if k == 0 || k > MAX_SUBGROUPS {
            return Err(invalid(
                "subgroups",
                format!("need 1..={MAX_SUBGROUPS} subgroups, got {k}"),
            ));
        }
        if names.len() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                got: names.len(),
            });
        }
        let d = components[0].dim();
        if let Some(c) = components.iter().find(|c| c.dim() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: c.dim(),
            });
        }
        check_marginal("p_ref", &p_ref, k)?;
        check_marginal("p_bias", &p_bias, k)?;
        Ok(Self {
            names,
            components,
            p_ref,
            p_bias,
        })
    }

    fn numbered(k: usize) -> Vec<String> {
        (0..k).map(|i| i.to_string()).collect()
    }

    /// One attribute in one dimension: `N(-2, 0.25)` and `N(2, 0.25)`,
    /// biased marginal `(bias, 1 - bias)`, balanced reference.
    pub fn single_attribute(bias: f64) -> Result<Self> {
        Self::new(
            Self::numbered(2),
            vec![
                Gaussian::isotropic(vec![-2.0], 0.25)?,
                Gaussian::isotropic(vec![2.0], 0.25)?,
            ],
            vec![0.5, 0.5],
            vec![bias, 1.0 - bias],
        )
    }

    /// Two-dimensional variant of [`single_attribute`](Self::single_attribute):
    /// the attribute separates along the first coordinate, the second is a
    /// unit-variance nuisance coordinate shared by both subgroups.
    pub fn single_attribute_2d(bias: f64) -> Result<Self> {
        let cov = vec![0.25, 0.0, 0.0, 1.0];
        Self::new(
            Self::numbered(2),
            vec![
                Gaussian::new(vec![-2.0, 0.0], cov.clone())?,
                Gaussian::new(vec![2.0, 0.0], cov)?,
            ],
            vec![0.5, 0.5],
            vec![bias, 1.0 - bias],
        )
    }

    /// Two binary attributes, four subgroups `00, 01, 10, 11` on the corners
    /// of a square in the plane.
    pub fn multi_attribute() -> Result<Self> {
        let names = ["00", "01", "10", "11"].map(String::from).to_vec();
        let means = [[-2.0, -2.0], [-2.0, 2.0], [2.0, -2.0], [2.0, 2.0]];
        let components = means
            .iter()
            .map(|m| Gaussian::isotropic(m.to_vec(), 0.25))
            .collect::<Result<Vec<_>>>()?;
        Self::new(names, components, vec![0.25; 4], vec![0.437, 0.063, 0.415, 0.085])
    }

    pub fn dim(&self) -> usize {
        self.components[0].dim()
    }

    pub fn n_subgroups(&self) -> usize {
        self.components.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn components(&self) -> &[Gaussian] {
        &self.components
    }

    pub fn component(&self, k: usize) -> &Gaussian {
        &self.components[k]
    }

    pub fn marginal(&self, which: Which) -> &[f64] {
        match which {
            Which::Bias => &self.p_bias,
            Which::Ref => &self.p_ref,
        }
    }

    pub fn p_ref(&self) -> &[f64] {
        &self.p_ref
    }

    pub fn p_bias(&self) -> &[f64] {
        &self.p_bias
    }

    /// `b(k) = p_bias(k) / p_ref(k)`.
    pub fn b(&self, k: usize) -> Result<f64> {
        if self.p_ref[k] == 0.0 {
            return Err(Error::UndefinedRatio(k));
        }
        Ok(self.p_bias[k] / self.p_ref[k])
    }

    /// Copy with the biased marginal replaced, e.g. a no-bias control.
    pub fn with_bias_marginal(&self, p_bias: Vec<f64>) -> Result<Self> {
        Self::new(self.names.clone(), self.components.clone(), self.p_ref.clone(), p_bias)
    }

    /// Copy with every component mean moved by `scale` and covariances kept,
    /// for overlap studies.
    pub fn with_scaled_means(&self, scale: f64) -> Result<Self> {
        let components = self
            .components
            .iter()
            .map(|c| Gaussian::new(c.mean().iter().map(|m| m * scale).collect(), c.covariance().to_vec()))
            .collect::<Result<Vec<_>>>()?;
        Self::new(self.names.clone(), components, self.p_ref.clone(), self.p_bias.clone())
    }

    pub fn disjointness_check(&self, threshold: f64) -> Result<OverlapReport> {
        let mut max_overlap = 0.0;
        let mut pair = None;
        for i in 0..self.n_subgroups() {
            for j in (i + 1)..self.n_subgroups() {
                let bc = self.components[i].bhattacharyya_coefficient(&self.components[j])?;
                if bc > max_overlap || pair.is_none() {
                    max_overlap = bc;
                    pair = Some((i, j));
                }
            }
        }
        Ok(OverlapReport {
            max_overlap,
            pair,
            threshold,
            disjoint: max_overlap < threshold,
        })
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    fn log_joint(&self, which: Which, x: &[f64]) -> Vec<f64> {
        self.marginal(which)
            .iter()
            .zip(&self.components)
            .map(|(p, c)| {
                if *p == 0.0 {
                    f64::NEG_INFINITY
                } else {
                    p.ln() + c.log_pdf(x)
                }
            })
            .collect()
    }

    pub fn log_density(&self, which: Which, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        Ok(log_sum_exp(&self.log_joint(which, x)))
    }

    /// `Σ_k p(z=k) N(x; μ_k, Σ_k)` under the chosen marginal.
    pub fn true_density(&self, which: Which, x: &[f64]) -> Result<f64> {
        Ok(self.log_density(which, x)?.exp())
    }

    /// `log p_bias(x) - log p_ref(x)`, exact for overlapping components too.
    pub fn log_bayes_ratio(&self, x: &[f64]) -> Result<f64> {
        let log_ref = self.log_density(Which::Ref, x)?;
        if !log_ref.is_finite() {
            return Err(Error::DensityUnderflow(x.to_vec()));
        }
        Ok(self.log_density(Which::Bias, x)? - log_ref)
    }

    /// `p_bias(x) / p_ref(x)`.
    pub fn bayes_ratio(&self, x: &[f64]) -> Result<f64> {
        Ok(self.log_bayes_ratio(x)?.exp())
    }

    /// `p(z = k | x)` under the reference marginal.
    pub fn subgroup_posterior(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        let joint = self.log_joint(Which::Ref, x);
        let total = log_sum_exp(&joint);
        if !total.is_finite() {
            return Err(Error::DensityUnderflow(x.to_vec()));
        }
        Ok(joint.iter().map(|l| (l - total).exp()).collect())
    }
}

/// Named configurations used throughout the experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BiasSetting {
    /// One attribute, 90/10 biased split.
    #[serde(rename = "single-90")]
    Single90,
    /// One attribute, 80/20 biased split.
    #[serde(rename = "single-80")]
    Single80,
    /// Two attributes, four subgroups.
    Multi,
    /// One attribute, biased marginal equal to the reference.
    NoBias,
    /// [`Single90`](Self::Single90) embedded in two dimensions.
    #[serde(rename = "single-90-planar")]
    Single90Planar,
    /// [`NoBias`](Self::NoBias) embedded in two dimensions.
    NoBiasPlanar,
}

impl BiasSetting {
    pub fn spec(self) -> Result<SubgroupSpec> {
        match self {
            BiasSetting::Single90 => SubgroupSpec::single_attribute(0.9),
            BiasSetting::Single80 => SubgroupSpec::single_attribute(0.8),
            BiasSetting::Multi => SubgroupSpec::multi_attribute(),
            BiasSetting::NoBias => SubgroupSpec::single_attribute(0.5),
            BiasSetting::Single90Planar => SubgroupSpec::single_attribute_2d(0.9),
            BiasSetting::NoBiasPlanar => SubgroupSpec::single_attribute_2d(0.5),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            BiasSetting::Single90 => "single-90",
            BiasSetting::Single80 => "single-80",
            BiasSetting::Multi => "multi",
            BiasSetting::NoBias => "no-bias",
            BiasSetting::Single90Planar => "single-90-planar",
            BiasSetting::NoBiasPlanar => "no-bias-planar",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledPoint {
    pub x: Vec<f64>,
    /// Generating subgroup. Evaluation only; see [`DatasetPair::training_view`].
    pub z_hidden: usize,
    /// 0 for the biased split, 1 for the reference split.
    pub y: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetPair {
    pub d_bias: Vec<LabeledPoint>,
    pub d_ref: Vec<LabeledPoint>,
    /// `|d_bias| / |d_ref|`.
    pub gamma: f64,
    pub spec: SubgroupSpec,
    pub seed: u64,
}

/// What training code is allowed to see: feature vectors and the split they
/// came from. Subgroup labels are not representable here.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingView {
    pub bias: Vec<Vec<f64>>,
    pub reference: Vec<Vec<f64>>,
    pub gamma: f64,
}

impl TrainingView {
    pub fn new(bias: Vec<Vec<f64>>, reference: Vec<Vec<f64>>) -> Result<Self> {
        if reference.is_empty() {
            return Err(Error::EmptyData("reference split"));
        }
        let gamma = bias.len() as f64 / reference.len() as f64;
        Ok(Self { bias, reference, gamma })
    }

    pub fn dim(&self) -> Option<usize> {
        self.bias.first().or_else(|| self.reference.first()).map(Vec::len)
    }
}

impl DatasetPair {
    pub fn training_view(&self) -> TrainingView {
        TrainingView {
            bias: self.d_bias.iter().map(|p| p.x.clone()).collect(),
            reference: self.d_ref.iter().map(|p| p.x.clone()).collect(),
            gamma: self.gamma,
        }
    }

    /// Subgroup labels in pooled order (biased points first), matching
    /// [`crate::genmodel::WeightedDataset`] layout.
    pub fn pooled_subgroups(&self) -> Vec<usize> {
        self.d_bias.iter().chain(&self.d_ref).map(|p| p.z_hidden).collect()
    }

    pub fn subgroup_counts(&self, which: Which) -> Vec<usize> {
        let points = match which {
            Which::Bias => &self.d_bias,
            Which::Ref => &self.d_ref,
        };
        let mut counts = vec![0; self.spec.n_subgroups()];
        for p in points {
            counts[p.z_hidden] += 1;
        }
        counts
    }
}

/// Splits `total` into integer counts proportional to `p`, with the
/// remainder handed to the largest fractional parts (ties to lower index).
pub fn largest_remainder(p: &[f64], total: usize) -> Vec<usize> {
    let raw: Vec<f64> = p.iter().map(|v| v * total as f64).collect();
    let mut counts: Vec<usize> = raw.iter().map(|r| r.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..p.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = raw[a] - raw[a].floor();
        let fb = raw[b] - raw[b].floor();
        fb.partial_cmp(&fa).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b))
    });
    if assigned < total {
        for &i in order.iter().cycle().take(total - assigned) {
            counts[i] += 1;
        }
    } else {
        let mut excess = assigned - total;
        for &i in order.iter().rev() {
            if excess == 0 {
                break;
            }
            if counts[i] > 0 {
                counts[i] -= 1;
                excess -= 1;
            }
        }
    }
    counts
}

fn stratified(spec: &SubgroupSpec, counts: &[usize], tag: u8, rng: &mut rng::Rng) -> Vec<LabeledPoint> {
    let mut points: Vec<LabeledPoint> = counts
        .iter()
        .enumerate()
        .flat_map(|(k, &n)| (0..n).map(move |_| k))
        .map(|k| LabeledPoint {
            x: spec.component(k).sample(rng),
            z_hidden: k,
            y: tag,
        })
        .collect();
    points.shuffle(rng);
    points
}

/// Builds a biased split of `n_bias` points and a reference split of
/// `round(perc · n_bias)` points with exact subgroup counts.
pub fn build_splits(spec: &SubgroupSpec, n_bias: usize, perc: f64, seed: u64) -> Result<DatasetPair> {
    if n_bias == 0 {
        return Err(invalid("n_bias", "must be at least 1"));
    }
    if !(perc > 0.0 && perc <= 1.0) {
        return Err(invalid("perc", format!("must lie in (0, 1], got {perc}")));
    }
    for k in 0..spec.n_subgroups() {
        if spec.p_ref[k] == 0.0 && spec.p_bias[k] > 0.0 {
            return Err(Error::UndefinedRatio(k));
        }
    }
    let n_ref = (perc * n_bias as f64).round() as usize;
    if n_ref == 0 {
        return Err(Error::EmptyData("reference split rounds to zero points"));
    }
    let bias_counts = largest_remainder(&spec.p_bias, n_bias);
    let ref_counts = largest_remainder(&spec.p_ref, n_ref);
    let d_bias = stratified(
        spec,
        &bias_counts,
        Which::Bias.tag(),
        &mut rng::stream(seed, streams::SPLIT_BIAS),
    );
    let d_ref = stratified(
        spec,
        &ref_counts,
        Which::Ref.tag(),
        &mut rng::stream(seed, streams::SPLIT_REF),
    );
    Ok(DatasetPair {
        gamma: d_bias.len() as f64 / d_ref.len() as f64,
        d_bias,
        d_ref,
        spec: spec.clone(),
        seed,
    })
}

fn draw_subgroup<R: Rng + ?Sized>(p: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut cum = 0.0;
    let mut last = 0;
    for (k, &pk) in p.iter().enumerate() {
        if pk > 0.0 {
            cum += pk;
            last = k;
            if u < cum {
                return k;
            }
        }
    }
    last
}

/// Ancestral i.i.d. sampling: `z ~ p(z)`, then `x ~ component[z]`.
pub fn sample(spec: &SubgroupSpec, which: Which, n: usize, seed: u64) -> Vec<LabeledPoint> {
    let mut r = rng::stream(seed, streams::SAMPLE + 100 * which.tag() as u64);
    let p = spec.marginal(which);
    (0..n)
        .map(|_| {
            let k = draw_subgroup(p, &mut r);
            LabeledPoint {
                x: spec.component(k).sample(&mut r),
                z_hidden: k,
                y: which.tag(),
            }
        })
        .collect()
}

/// Fresh i.i.d. evaluation pair with `n_bias` and `n_ref` points.
pub fn sample_pair(spec: &SubgroupSpec, n_bias: usize, n_ref: usize, seed: u64) -> Result<DatasetPair> {
    if n_ref == 0 {
        return Err(Error::EmptyData("reference split"));
    }
    let d_bias = sample(spec, Which::Bias, n_bias, seed);
    let d_ref = sample(spec, Which::Ref, n_ref, seed);
    Ok(DatasetPair {
        gamma: n_bias as f64 / n_ref as f64,
        d_bias,
        d_ref,
        spec: spec.clone(),
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec90() -> SubgroupSpec {
        SubgroupSpec::single_attribute(0.9).unwrap()
    }

    #[test]
    fn setting_one_split_counts() {
        let pair = build_splits(&spec90(), 1000, 1.0, 7).unwrap();
        assert_eq!(pair.subgroup_counts(Which::Bias), vec![900, 100]);
        assert_eq!(pair.subgroup_counts(Which::Ref), vec![500, 500]);
        assert_eq!(pair.gamma, 1.0);
        assert!(pair.d_bias.iter().all(|p| p.y == 0));
        assert!(pair.d_ref.iter().all(|p| p.y == 1));
    }

    #[test]
    fn no_bias_split_counts() {
        let spec = SubgroupSpec::single_attribute(0.5).unwrap();
        let pair = build_splits(&spec, 100, 1.0, 0).unwrap();
        assert_eq!(pair.subgroup_counts(Which::Bias), vec![50, 50]);
        assert_eq!(pair.subgroup_counts(Which::Ref), vec![50, 50]);
        assert_eq!(pair.gamma, 1.0);
    }

    #[test]
    fn multi_split_counts() {
        let spec = SubgroupSpec::multi_attribute().unwrap();
        let pair = build_splits(&spec, 10_000, 0.5, 1).unwrap();
        assert_eq!(pair.subgroup_counts(Which::Bias), vec![4370, 630, 4150, 850]);
        assert_eq!(pair.subgroup_counts(Which::Ref), vec![1250; 4]);
        assert_eq!(pair.gamma, 2.0);
    }

    #[test]
    fn split_errors() {
        let spec = spec90();
        assert!(build_splits(&spec, 100, 0.0, 0).is_err());
        assert!(build_splits(&spec, 100, 1.5, 0).is_err());
        assert!(build_splits(&spec, 0, 0.5, 0).is_err());
        let bad = SubgroupSpec::new(
            vec!["a".into(), "b".into()],
            spec.components().to_vec(),
            vec![1.0, 0.0],
            vec![0.5, 0.5],
        )
        .unwrap();
        assert!(matches!(build_splits(&bad, 100, 1.0, 0), Err(Error::UndefinedRatio(1))));
    }

    #[test]
    fn largest_remainder_is_exact() {
        assert_eq!(largest_remainder(&[1.0 / 3.0; 3], 10), vec![4, 3, 3]);
        assert_eq!(largest_remainder(&[0.5, 0.5], 101).iter().sum::<usize>(), 101);
        assert_eq!(
            largest_remainder(&[0.437, 0.063, 0.415, 0.085], 7)
                .iter()
                .sum::<usize>(),
            7
        );
    }

    #[test]
    fn empty_sample() {
        assert!(sample(&spec90(), Which::Bias, 0, 3).is_empty());
    }

    #[test]
    fn sampling_is_deterministic() {
        let a = sample(&spec90(), Which::Ref, 200, 11);
        let b = sample(&spec90(), Which::Ref, 200, 11);
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        let c = sample(&spec90(), Which::Ref, 200, 12);
        assert_ne!(a, c);
    }

    #[test]
    fn sample_subgroup_fraction() {
        let n = 100_000;
        let pts = sample(&spec90(), Which::Bias, n, 5);
        let frac = pts.iter().filter(|p| p.z_hidden == 0).count() as f64 / n as f64;
        // binomial standard error sqrt(0.9 * 0.1 / 1e5) ≈ 9.5e-4; 0.005 is > 5 se
        assert!((frac - 0.9).abs() < 0.005, "fraction {frac}");
    }

    #[test]
    fn density_closed_form() {
        let spec = spec90();
        let d = spec.true_density(Which::Ref, &[-2.0]).unwrap();
        let peak = 1.0 / (2.0 * std::f64::consts::PI * 0.25).sqrt();
        let far = peak * (-16.0f64 / 0.5).exp();
        assert!((d - 0.5 * (peak + far)).abs() < 1e-14);
        assert!((d - 0.5 * 0.797_884_560_802_865_4).abs() < 1e-9);
    }

    #[test]
    fn density_symmetry_and_equal_marginals() {
        let spec = spec90();
        let nb = SubgroupSpec::single_attribute(0.5).unwrap();
        for x in [-3.1, -0.4, 0.0, 0.7, 2.5] {
            let a = spec.true_density(Which::Ref, &[x]).unwrap();
            let b = spec.true_density(Which::Ref, &[-x]).unwrap();
            assert!((a - b).abs() <= 1e-15 * a.max(1e-300));
            let r = nb.true_density(Which::Ref, &[x]).unwrap();
            let s = nb.true_density(Which::Bias, &[x]).unwrap();
            assert_eq!(r, s);
            assert_eq!(nb.bayes_ratio(&[x]).unwrap(), 1.0);
        }
    }

    #[test]
    fn bayes_ratio_limits() {
        let spec = spec90();
        let r = spec.bayes_ratio(&[-2.0]).unwrap();
        // neighbor contributes e^-32 relative mass
        let e = (-32.0f64).exp();
        let exact = (0.9 + 0.1 * e) / (0.5 + 0.5 * e);
        assert!((r - exact).abs() < 1e-14);
        assert!((r - 1.8).abs() < 1e-12);
        let multi = SubgroupSpec::multi_attribute().unwrap();
        assert!((multi.bayes_ratio(&[-2.0, 2.0]).unwrap() - 0.252).abs() < 1e-9);
    }

    #[test]
    fn posterior_cases() {
        let spec = spec90();
        let mid = spec.subgroup_posterior(&[0.0]).unwrap();
        assert!((mid[0] - 0.5).abs() < 1e-15 && (mid[1] - 0.5).abs() < 1e-15);
        let at_mean = spec.subgroup_posterior(&[-2.0]).unwrap();
        assert!(at_mean[0] >= 1.0 - 1e-6);
        let multi = SubgroupSpec::multi_attribute().unwrap();
        for p in sample(&multi, Which::Bias, 50, 2) {
            let post = multi.subgroup_posterior(&p.x).unwrap();
            assert!((post.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn dimension_mismatch() {
        assert!(matches!(
            spec90().true_density(Which::Ref, &[0.0, 1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn marginals_must_normalize() {
        let spec = spec90();
        assert!(spec.with_bias_marginal(vec![0.9, 0.2]).is_err());
        assert!(spec.with_bias_marginal(vec![1.1, -0.1]).is_err());
    }

    #[test]
    fn disjointness() {
        assert!(spec90().disjointness_check(DEFAULT_OVERLAP_THRESHOLD).unwrap().disjoint);
        let close = spec90().with_scaled_means(0.25).unwrap();
        assert!(!close.disjointness_check(DEFAULT_OVERLAP_THRESHOLD).unwrap().disjoint);
        assert!(
            SubgroupSpec::multi_attribute()
                .unwrap()
                .disjointness_check(DEFAULT_OVERLAP_THRESHOLD)
                .unwrap()
                .disjoint
        );
    }

    #[test]
    fn json_round_trip_and_schema() {
        let spec = SubgroupSpec::multi_attribute().unwrap();
        let text = serde_json::to_string(&spec).unwrap();
        let value: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(value["covariances"][0].as_array().unwrap().len(), 4);
        assert_eq!(value["subgroups"][1], "01");
        let back: SubgroupSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(back, spec);
        let broken = text.replace("0.437", "0.5");
        assert!(serde_json::from_str::<SubgroupSpec>(&broken).is_err());
    }

    #[test]
    fn training_view_has_no_subgroup_labels() {
        let pair = build_splits(&spec90(), 50, 0.5, 0).unwrap();
        let view = serde_json::to_value(pair.training_view()).unwrap();
        let text = view.to_string();
        assert!(!text.contains("z_hidden"));
        assert_eq!(view.as_object().unwrap().len(), 3);
    }
}
