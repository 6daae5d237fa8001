//! Bayes cross-entropy versus learned classifiers on the three settings.

use fairweight::dre::{empirical_nce, train_classifier, ClassifierHyper};
use fairweight::oracle::{bayes_ce_monte_carlo, BiasConfig};
use fairweight::rng::child_seed;
use fairweight::synthdata::{build_splits, BiasSetting};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;

pub const SETTINGS: [BiasSetting; 3] = [BiasSetting::Single90, BiasSetting::Single80, BiasSetting::Multi];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Table1Config {
    /// Training points per split; γ = 1.
    pub n_per_split: usize,
    /// Fresh evaluation points per split.
    pub n_eval: usize,
    pub monte_carlo_points: usize,
    pub classifier: ClassifierHyper,
    pub seed: u64,
}

impl Default for Table1Config {
    fn default() -> Self {
        Self {
            n_per_split: 10_000,
            n_eval: 50_000,
            monte_carlo_points: 100_000,
            classifier: ClassifierHyper::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table1Row {
    pub setting: String,
    pub closed_form: f64,
    pub monte_carlo: f64,
    pub learned: f64,
    pub learned_minus_closed_form: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table1Report {
    pub config: Table1Config,
    pub rows: Vec<Table1Row>,
}

/// Closed-form Bayes cross-entropy of every setting at γ = 1.
pub fn closed_form_column() -> Result<Vec<f64>> {
    SETTINGS
        .iter()
        .map(|s| Ok(BiasConfig::from_spec(&s.spec()?, 1.0)?.bayes_ce()?))
        .collect()
}

pub fn table1_row(setting: BiasSetting, cfg: &Table1Config) -> Result<Table1Row> {
    let spec = setting.spec()?;
    let base = child_seed(cfg.seed, setting as u64);
    let closed_form = BiasConfig::from_spec(&spec, 1.0)?.bayes_ce()?;
    let monte_carlo = bayes_ce_monte_carlo(&spec, 1.0, cfg.monte_carlo_points, child_seed(base, 0))?;
    let train = build_splits(&spec, cfg.n_per_split, 1.0, child_seed(base, 1))?.training_view();
    let hyper = ClassifierHyper {
        seed: child_seed(base, 2),
        ..cfg.classifier.clone()
    };
    let clf = train_classifier(&train, &hyper)?;
    let eval = build_splits(&spec, cfg.n_eval, 1.0, child_seed(base, 3))?.training_view();
    let learned = empirical_nce(&clf, &eval)?;
    Ok(Table1Row {
        setting: setting.label().to_string(),
        closed_form,
        monte_carlo,
        learned,
        learned_minus_closed_form: learned - closed_form,
    })
}

pub fn reproduce_table1(cfg: &Table1Config) -> Result<Table1Report> {
    let rows = SETTINGS
        .par_iter()
        .map(|&s| table1_row(s, cfg))
        .collect::<Result<Vec<_>>>()?;
    Ok(Table1Report {
        config: cfg.clone(),
        rows,
    })
}
