//! Grid runner: one directory per (method, perc, α, seed) cell plus a
//! manifest that is enough to regenerate every cell.

use std::fs;
use std::path::{Path, PathBuf};

use fairweight::dre::{
    empirical_nce, holdout_split, platt_recalibrate, train_classifier, DensityRatio, RatioClassifier,
};
use fairweight::evalmetrics::{
    attribute_marginal, balanced_reference_moments, fairness_discrepancy, frechet_distance,
    weight_histogram_by_subgroup, AttributeRule, GaussianMoments, MarginalVector, SubgroupWeightSummary,
};
use fairweight::genmodel::{
    assign_weights, fit_conditional, fit_equi_weight, fit_reference_only, fit_weighted_gan, fit_weighted_gmm,
    mean_estimation_error, subgroup_masses, ConditionalGmm, GanModel, GenerativeModel, GmmModel, WeightedDataset,
};
use fairweight::io::{write_fit_log_csv, write_json};
use fairweight::oracle::BayesWeights;
use fairweight::rng::child_seed;
use fairweight::synthdata::{build_splits, DatasetPair, SubgroupSpec, TrainingView};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{ExperimentConfig, Method, ModelFamily, WeightSource};
use crate::error::{CliError, Result};

pub const MANIFEST: &str = "manifest.json";
pub const METRICS: &str = "metrics.json";

/// Per-purpose seeds derived from one experiment seed. The data seed is the
/// experiment seed itself so every method in a row sees the same splits.
#[derive(Debug, Clone, Copy)]
struct CellSeeds {
    data: u64,
    classifier: u64,
    model: u64,
    samples: u64,
    eval: u64,
    moments: u64,
}

impl CellSeeds {
    fn new(seed: u64) -> Self {
        Self {
            data: seed,
            classifier: child_seed(seed, 1),
            model: child_seed(seed, 2),
            samples: child_seed(seed, 3),
            eval: child_seed(seed, 4),
            moments: child_seed(seed, 5),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellKey {
    pub method: Method,
    pub perc: f64,
    /// `None` for methods that do not reweight.
    pub alpha: Option<f64>,
    pub seed: u64,
}

impl CellKey {
    pub fn relative_dir(&self) -> PathBuf {
        let alpha = self.alpha.map_or_else(|| "none".to_string(), |a| a.to_string());
        PathBuf::from(self.method.label())
            .join(format!("perc-{}", self.perc))
            .join(format!("alpha-{alpha}"))
            .join(format!("seed-{}", self.seed))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub setting: String,
    pub method: Method,
    pub model: ModelFamily,
    pub perc: f64,
    pub alpha: Option<f64>,
    pub seed: u64,
    pub n_bias: usize,
    pub n_ref: usize,
    /// Fairness discrepancy from posterior-mean attribute labels.
    pub fd: f64,
    /// Fairness discrepancy from argmax attribute labels.
    pub fd_thresholded: f64,
    pub marginal: Vec<f64>,
    /// Data-space Fréchet distance to balanced reference moments.
    pub frechet: f64,
    /// Held-out cross-entropy of the ratio classifier.
    pub ce: Option<f64>,
    /// Mixing weights matched to subgroups (mixture models only).
    pub subgroup_masses: Option<Vec<f64>>,
    /// Summed distance between matched and true subgroup means.
    pub mean_error: Option<f64>,
    pub clamped_weights: usize,
    pub em_iterations: Option<usize>,
    pub converged: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FittedModel {
    Gmm(GmmModel),
    Conditional(ConditionalGmm),
    Gan(GanModel),
}

impl FittedModel {
    fn sample(&self, n: usize, seed: u64) -> fairweight::Result<Vec<Vec<f64>>> {
        match self {
            FittedModel::Gmm(m) => m.sample(n, seed),
            FittedModel::Conditional(m) => m.sample(n, seed),
            FittedModel::Gan(m) => m.sample(n, seed),
        }
    }

    /// The mixture whose samples are evaluated, if this is one.
    fn mixture(&self) -> Option<&GmmModel> {
        match self {
            FittedModel::Gmm(m) => Some(m),
            FittedModel::Conditional(m) => Some(&m.reference),
            FittedModel::Gan(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config_hash: String,
    pub version: String,
    pub seeds: Vec<u64>,
    pub config: ExperimentConfig,
    pub cells: Vec<PathBuf>,
    /// SHA-256 over every cell's metrics bytes in `cells` order.
    pub metrics_digest: String,
}

/// Everything one cell produced.
#[derive(Debug, Clone)]
pub struct CellOutput {
    pub key: CellKey,
    pub metrics: MetricsRecord,
    pub model: FittedModel,
    pub classifier: Option<RatioClassifier>,
    pub histogram: Option<Vec<SubgroupWeightSummary>>,
}

fn ensure_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|source| CliError::Unwritable {
        path: path.to_path_buf(),
        source,
    })
}

enum Weighter<'a> {
    Learned(&'a RatioClassifier),
    Bayes(BayesWeights<'a>),
}

impl DensityRatio for Weighter<'_> {
    fn importance_weight(&self, x: &[f64]) -> fairweight::Result<fairweight::dre::WeightEstimate> {
        match self {
            Weighter::Learned(c) => c.importance_weight(x),
            Weighter::Bayes(b) => b.importance_weight(x),
        }
    }
}

/// Shared context of one (perc, seed) row.
struct Row<'a> {
    cfg: &'a ExperimentConfig,
    spec: &'a SubgroupSpec,
    pair: DatasetPair,
    view: TrainingView,
    seeds: CellSeeds,
    target: MarginalVector,
    moments: GaussianMoments,
}

impl Row<'_> {
    fn train_classifier(&self) -> Result<(RatioClassifier, f64)> {
        let cfg = self.cfg;
        let hyper = fairweight::dre::ClassifierHyper {
            seed: self.seeds.classifier,
            ..cfg.classifier.clone()
        };
        let mut clf = if cfg.eval.platt {
            let (train, held) = holdout_split(&self.view, cfg.classifier.val_fraction, self.seeds.classifier)?;
            platt_recalibrate(&train_classifier(&train, &hyper)?, &held)?
        } else {
            train_classifier(&self.view, &hyper)?
        };
        clf.gamma = self.view.gamma;
        let eval = build_splits(
            self.spec,
            cfg.eval.ce_points,
            self.pair.d_ref.len() as f64 / self.pair.d_bias.len() as f64,
            self.seeds.eval,
        )?
        .training_view();
        let ce = empirical_nce(&clf, &eval)?;
        Ok((clf, ce))
    }

    fn fit(&self, method: Method, wd: Option<&WeightedDataset>) -> Result<FittedModel> {
        let cfg = self.cfg;
        match cfg.model {
            ModelFamily::Gmm => {
                let gmm = fairweight::genmodel::GmmConfig {
                    init_seed: self.seeds.model,
                    ..cfg.resolved_gmm()?
                };
                Ok(match method {
                    Method::ImpWeight => FittedModel::Gmm(fit_weighted_gmm(wd.expect("weighted data"), &gmm)?),
                    Method::EquiWeight => FittedModel::Gmm(fit_equi_weight(&self.view, &gmm)?),
                    Method::ReferenceOnly => FittedModel::Gmm(fit_reference_only(&self.view, &gmm)?),
                    Method::Conditional => FittedModel::Conditional(fit_conditional(&self.view, &gmm)?),
                })
            }
            ModelFamily::Gan => {
                let hyper = fairweight::genmodel::GanHyper {
                    seed: self.seeds.model,
                    ..cfg.gan.clone()
                };
                let data = match method {
                    Method::ImpWeight | Method::EquiWeight => wd.expect("weighted data").clone(),
                    Method::ReferenceOnly => {
                        let n = self.view.reference.len();
                        WeightedDataset::new(self.view.reference.clone(), vec![1.0; n], vec![1; n])?
                    }
                    Method::Conditional => unreachable!("rejected by config validation"),
                };
                Ok(FittedModel::Gan(fit_weighted_gan(&data, &hyper)?))
            }
        }
    }

    fn evaluate(
        &self,
        key: CellKey,
        model: FittedModel,
        classifier: Option<(&RatioClassifier, f64)>,
        wd: Option<&WeightedDataset>,
    ) -> Result<CellOutput> {
        let samples = model.sample(self.cfg.eval.n_samples, self.seeds.samples)?;
        let soft = attribute_marginal(self.spec, &samples, AttributeRule::Soft)?;
        let hard = attribute_marginal(self.spec, &samples, AttributeRule::Thresholded)?;
        let frechet = frechet_distance(&GaussianMoments::from_samples(&samples)?, &self.moments)?;
        let mix = model.mixture();
        let histogram = match wd {
            Some(wd) => Some(weight_histogram_by_subgroup(
                wd,
                &self.pair.pooled_subgroups(),
                self.cfg.eval.histogram_bins,
            )?),
            None => None,
        };
        let metrics = MetricsRecord {
            setting: self.cfg.setting.label().to_string(),
            method: key.method,
            model: self.cfg.model,
            perc: key.perc,
            alpha: key.alpha,
            seed: key.seed,
            n_bias: self.pair.d_bias.len(),
            n_ref: self.pair.d_ref.len(),
            fd: fairness_discrepancy(&self.target, &soft)?,
            fd_thresholded: fairness_discrepancy(&self.target, &hard)?,
            marginal: soft.as_slice().to_vec(),
            frechet,
            ce: classifier.map(|(_, ce)| ce),
            subgroup_masses: mix.map(|m| subgroup_masses(m, self.spec)).transpose()?,
            mean_error: mix.map(|m| mean_estimation_error(m, self.spec)).transpose()?,
            clamped_weights: wd.map_or(0, |w| w.clamped),
            em_iterations: mix.map(|m| m.fit_log.len().saturating_sub(1)),
            converged: mix.map(|m| m.converged),
        };
        Ok(CellOutput {
            key,
            metrics,
            model,
            classifier: classifier.map(|(c, _)| c.clone()),
            histogram,
        })
    }
}

/// Computes every cell of one (perc, seed) row without touching disk.
pub fn run_row(cfg: &ExperimentConfig, perc: f64, seed: u64) -> Result<Vec<CellOutput>> {
    let spec = cfg.resolved_spec()?;
    let seeds = CellSeeds::new(seed);
    let pair = build_splits(&spec, cfg.n_bias, perc, seeds.data)?;
    let view = pair.training_view();
    let row = Row {
        cfg,
        spec: &spec,
        moments: balanced_reference_moments(&spec, cfg.eval.n_samples, seeds.moments)?,
        target: MarginalVector::new(spec.p_ref().to_vec())?,
        view,
        pair,
        seeds,
    };
    let mut out = Vec::new();
    for &method in &cfg.methods {
        if method.uses_alpha() {
            let learned = match cfg.weights {
                WeightSource::Learned => Some(row.train_classifier()?),
                WeightSource::Bayes => None,
            };
            let weighter = match &learned {
                Some((c, _)) => Weighter::Learned(c),
                None => Weighter::Bayes(BayesWeights { spec: &spec }),
            };
            for &alpha in &cfg.alpha {
                let wd = assign_weights(&row.view, &weighter, alpha)?;
                let key = CellKey {
                    method,
                    perc,
                    alpha: Some(alpha),
                    seed,
                };
                let model = row.fit(method, Some(&wd))?;
                out.push(row.evaluate(key, model, learned.as_ref().map(|(c, ce)| (c, *ce)), Some(&wd))?);
            }
        } else {
            let key = CellKey {
                method,
                perc,
                alpha: None,
                seed,
            };
            let wd = (method == Method::EquiWeight).then(|| WeightedDataset::equi_weight(&row.view));
            let model = row.fit(method, wd.as_ref())?;
            out.push(row.evaluate(key, model, None, wd.as_ref())?);
        }
    }
    Ok(out)
}

fn write_cell(root: &Path, cell: &CellOutput) -> Result<Vec<u8>> {
    let dir = root.join(cell.key.relative_dir());
    ensure_dir(&dir)?;
    if let Some(c) = &cell.classifier {
        write_json(&dir.join("classifier.json"), c)?;
    }
    write_json(&dir.join("model.json"), &cell.model)?;
    if let Some(m) = cell.model.mixture() {
        write_fit_log_csv(&dir.join("fit_log.csv"), &m.fit_log)?;
    }
    if let Some(h) = &cell.histogram {
        write_json(&dir.join("weight_histogram.json"), h)?;
    }
    let bytes = serde_json::to_vec_pretty(&cell.metrics)?;
    fs::write(dir.join(METRICS), &bytes).map_err(|source| CliError::Unwritable {
        path: dir.clone(),
        source,
    })?;
    Ok(bytes)
}

/// Runs the full grid into `out` with up to `jobs` worker threads.
pub fn run_experiment(cfg: &ExperimentConfig, out: &Path, jobs: usize) -> Result<Manifest> {
    cfg.validate()?;
    ensure_dir(out)?;
    let rows: Vec<(f64, u64)> = cfg
        .perc
        .iter()
        .flat_map(|&p| cfg.seeds.iter().map(move |&s| (p, s)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .expect("thread pool");
    let results: Vec<Result<Vec<(PathBuf, Vec<u8>)>>> = pool.install(|| {
        rows.par_iter()
            .map(|&(p, s)| {
                run_row(cfg, p, s)?
                    .iter()
                    .map(|cell| Ok((cell.key.relative_dir(), write_cell(out, cell)?)))
                    .collect()
            })
            .collect()
    });
    let mut cells = Vec::new();
    let mut digest = Sha256::new();
    for r in results {
        for (dir, bytes) in r? {
            digest.update(&bytes);
            cells.push(dir);
        }
    }
    let manifest = Manifest {
        config_hash: cfg.hash(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        seeds: cfg.seeds.clone(),
        config: cfg.clone(),
        cells,
        metrics_digest: hex::encode(digest.finalize()),
    };
    write_json(&out.join(MANIFEST), &manifest)?;
    Ok(manifest)
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Unreadable {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(serde_json::from_str(&text)?)
}

/// Regenerates an experiment from a manifest into `out`.
pub fn rerun_from_manifest(manifest: &Path, out: &Path, jobs: usize) -> Result<Manifest> {
    let m = read_manifest(manifest)?;
    run_experiment(&m.config, out, jobs)
}

/// Reads every cell's metrics under an experiment directory.
pub fn read_metrics(root: &Path) -> Result<Vec<MetricsRecord>> {
    let mut paths: Vec<PathBuf> = walkdir::WalkDir::new(root)
        .into_iter()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_type().is_file() && e.file_name() == METRICS)
        .map(|e| e.into_path())
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| {
            let text = fs::read_to_string(p).map_err(|source| CliError::Unreadable {
                path: p.clone(),
                source,
            })?;
            Ok(serde_json::from_str(&text)?)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use fairweight::synthdata::BiasSetting;

    #[test]
    fn cell_directories_are_stable() {
        let k = CellKey {
            method: Method::ImpWeight,
            perc: 0.25,
            alpha: Some(1.5),
            seed: 7,
        };
        assert_eq!(k.relative_dir(), PathBuf::from("imp-weight/perc-0.25/alpha-1.5/seed-7"));
        let k = CellKey {
            method: Method::Conditional,
            perc: 1.0,
            alpha: None,
            seed: 0,
        };
        assert_eq!(k.relative_dir(), PathBuf::from("conditional/perc-1/alpha-none/seed-0"));
    }

    #[test]
    fn row_covers_every_method_and_alpha() {
        let cfg = ExperimentConfig {
            methods: Method::ALL.to_vec(),
            alpha: vec![0.0, 1.0],
            n_bias: 300,
            classifier: fairweight::dre::ClassifierHyper {
                epochs: 2,
                ..Default::default()
            },
            eval: crate::config::EvalConfig {
                n_samples: 500,
                ce_points: 200,
                ..Default::default()
            },
            ..ExperimentConfig::minimal(BiasSetting::Single90, 3)
        };
        let cells = run_row(&cfg, 0.25, 3).unwrap();
        assert_eq!(cells.len(), 5);
        assert!(cells.iter().all(|c| c.metrics.fd.is_finite() && c.metrics.n_ref == 75));
        assert!(cells[0].metrics.ce.is_some() && cells[2].metrics.ce.is_none());
        // α = 0 reweighting is the pooled fit
        assert_eq!(cells[0].model, cells[2].model);
        assert_eq!(cells[0].metrics.fd, cells[2].metrics.fd);
    }
}
