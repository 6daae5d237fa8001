//! Experiment configuration documents.

use std::collections::HashSet;
use std::path::PathBuf;

use fairweight::dre::ClassifierHyper;
use fairweight::genmodel::{GanHyper, GmmConfig};
use fairweight::synthdata::{BiasSetting, SubgroupSpec};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{config_error, CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    ImpWeight,
    EquiWeight,
    ReferenceOnly,
    Conditional,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::ImpWeight,
        Method::EquiWeight,
        Method::ReferenceOnly,
        Method::Conditional,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Method::ImpWeight => "imp-weight",
            Method::EquiWeight => "equi-weight",
            Method::ReferenceOnly => "reference-only",
            Method::Conditional => "conditional",
        }
    }

    /// Only reweighting sweeps the flattening exponent.
    pub fn uses_alpha(self) -> bool {
        self == Method::ImpWeight
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelFamily {
    #[default]
    Gmm,
    Gan,
}

/// Where imp-weight gets its density ratios.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightSource {
    #[default]
    Learned,
    /// Exact ratios from the generating `SubgroupSpec`.
    Bayes,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// Model samples drawn per cell for the fairness and Fréchet metrics.
    pub n_samples: usize,
    pub histogram_bins: usize,
    /// Biased points in the held-out split used for the classifier CE.
    pub ce_points: usize,
    /// Recalibrate the classifier on its validation split before weighting.
    pub platt: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            n_samples: 20_000,
            histogram_bins: 20,
            ce_points: 10_000,
            platt: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub setting: BiasSetting,
    /// Replaces the named setting's parameters when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec: Option<SubgroupSpec>,
    pub n_bias: usize,
    pub perc: Vec<f64>,
    #[serde(default = "default_alpha")]
    pub alpha: Vec<f64>,
    pub methods: Vec<Method>,
    #[serde(default)]
    pub model: ModelFamily,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub weights: WeightSource,
    #[serde(default)]
    pub classifier: ClassifierHyper,
    /// Defaults to one component per subgroup.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gmm: Option<GmmConfig>,
    #[serde(default)]
    pub gan: GanHyper,
    #[serde(default)]
    pub eval: EvalConfig,
    /// Excluded from the config hash.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

fn default_alpha() -> Vec<f64> {
    vec![1.0]
}

impl ExperimentConfig {
    /// Smallest useful experiment: one seed, equi-weight, GMM.
    pub fn minimal(setting: BiasSetting, seed: u64) -> Self {
        Self {
            setting,
            spec: None,
            n_bias: 500,
            perc: vec![0.25],
            alpha: default_alpha(),
            methods: vec![Method::EquiWeight],
            model: ModelFamily::Gmm,
            seeds: vec![seed],
            weights: WeightSource::Learned,
            classifier: ClassifierHyper::default(),
            gmm: None,
            gan: GanHyper::default(),
            eval: EvalConfig::default(),
            output_dir: None,
        }
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            config_error(path, e.into_inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Unreadable {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json_str(&text)
    }

    pub fn resolved_spec(&self) -> Result<SubgroupSpec> {
        match &self.spec {
            Some(s) => Ok(s.clone()),
            None => Ok(self.setting.spec()?),
        }
    }

    pub fn resolved_gmm(&self) -> Result<GmmConfig> {
        match &self.gmm {
            Some(g) => Ok(g.clone()),
            None => Ok(GmmConfig {
                k: self.resolved_spec()?.n_subgroups(),
                ..GmmConfig::default()
            }),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.resolved_spec().map_err(|e| config_error("spec", e.to_string()))?;
        if self.n_bias == 0 {
            return Err(config_error("n_bias", "must be positive"));
        }
        if self.perc.is_empty() {
            return Err(config_error("perc", "must be non-empty"));
        }
        for (i, &p) in self.perc.iter().enumerate() {
            if !(p > 0.0 && p <= 1.0) {
                return Err(config_error(format!("perc[{i}]"), format!("{p} is outside (0, 1]")));
            }
            if (p * self.n_bias as f64).round() < 1.0 {
                return Err(config_error(format!("perc[{i}]"), "reference split would be empty"));
            }
        }
        unique(&self.perc.iter().map(|p| p.to_bits()).collect::<Vec<_>>(), "perc")?;
        if self.alpha.is_empty() {
            return Err(config_error("alpha", "must be non-empty"));
        }
        for (i, &a) in self.alpha.iter().enumerate() {
            if !(a.is_finite() && a >= 0.0) {
                return Err(config_error(
                    format!("alpha[{i}]"),
                    format!("{a} must be finite and nonnegative"),
                ));
            }
        }
        unique(&self.alpha.iter().map(|a| a.to_bits()).collect::<Vec<_>>(), "alpha")?;
        if self.methods.is_empty() {
            return Err(config_error("methods", "must be non-empty"));
        }
        unique(&self.methods, "methods")?;
        if self.model == ModelFamily::Gan {
            if let Some(i) = self.methods.iter().position(|m| *m == Method::Conditional) {
                return Err(config_error(
                    format!("methods[{i}]"),
                    "conditional is only available for the gmm family",
                ));
            }
        }
        if self.seeds.is_empty() {
            return Err(config_error("seeds", "must be non-empty"));
        }
        unique(&self.seeds, "seeds")?;
        let c = &self.classifier;
        if !(c.lr > 0.0) || c.epochs == 0 || c.batch_size == 0 || !(c.val_fraction > 0.0 && c.val_fraction < 1.0) {
            return Err(config_error(
                "classifier",
                "needs lr > 0, epochs > 0, batch_size > 0, val_fraction in (0, 1)",
            ));
        }
        if let Some(g) = &self.gmm {
            g.validate().map_err(|e| config_error("gmm", e.to_string()))?;
        }
        if self.model == ModelFamily::Gan && (self.gan.latent_dim == 0 || self.gan.steps == 0) {
            return Err(config_error("gan", "latent_dim and steps must be positive"));
        }
        if self.eval.n_samples < 2 {
            return Err(config_error("eval.n_samples", "need at least two samples"));
        }
        if self.eval.histogram_bins == 0 {
            return Err(config_error("eval.histogram_bins", "must be positive"));
        }
        if self.eval.ce_points == 0 {
            return Err(config_error("eval.ce_points", "must be positive"));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, output location excluded.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.output_dir = None;
        let bytes = serde_json::to_vec(&canonical).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}

fn unique<T: std::hash::Hash + Eq>(items: &[T], field: &str) -> Result<()> {
    let mut seen = HashSet::new();
    for (i, it) in items.iter().enumerate() {
        if !seen.insert(it) {
            return Err(config_error(format!("{field}[{i}]"), "duplicate entry"));
        }
    }
    Ok(())
}
