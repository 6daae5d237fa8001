//! One-dimensional two-Gaussian demo: learned density ratios against the
//! Bayes ratio on a grid.

use std::fmt::Write as _;
use std::path::Path;

use fairweight::dre::{train_classifier, ClassifierHyper, DensityRatio};
use fairweight::synthdata::{build_splits, BiasSetting, Which};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const GRID_LO: f64 = -5.0;
pub const GRID_HI: f64 = 5.0;
pub const GRID_POINTS: usize = 2001;
/// Reference mass of the region reported in [`ToyReport::central_range`].
pub const CENTRAL_MASS: f64 = 0.95;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ToyConfig {
    /// Points per split.
    pub n: usize,
    /// Reference mass the evaluation grid must cover.
    pub coverage: f64,
    pub no_bias: bool,
    pub classifier: ClassifierHyper,
    pub seed: u64,
}

impl Default for ToyConfig {
    fn default() -> Self {
        Self {
            n: 1000,
            coverage: 0.99,
            no_bias: false,
            classifier: ClassifierHyper::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToyPoint {
    pub x: f64,
    pub estimated: f64,
    pub bayes: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyReport {
    pub config: ToyConfig,
    /// Highest-density lattice points holding `coverage` of the reference mass.
    pub grid: Vec<ToyPoint>,
    pub median_relative_error: f64,
    pub min_estimated: f64,
    pub max_estimated: f64,
    /// Smallest and largest estimated ratio over the highest-density
    /// region holding [`CENTRAL_MASS`] of the reference.
    pub central_range: [f64; 2],
}

/// Lattice points of the highest-density region holding `mass` of the
/// density, in increasing `x`.
pub fn highest_density_grid(density: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize, mass: f64) -> Vec<f64> {
    let h = (hi - lo) / (n - 1) as f64;
    let mut pts: Vec<(f64, f64)> = (0..n).map(|i| lo + i as f64 * h).map(|x| (x, density(x))).collect();
    let total: f64 = pts.iter().map(|p| p.1).sum();
    pts.sort_by(|a, b| b.1.total_cmp(&a.1));
    let mut acc = 0.0;
    let mut keep = Vec::new();
    for (x, d) in pts {
        if acc >= mass * total {
            break;
        }
        acc += d;
        keep.push(x);
    }
    keep.sort_by(f64::total_cmp);
    keep
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn toy_gmm_demo(cfg: &ToyConfig) -> Result<ToyReport> {
    let setting = if cfg.no_bias {
        BiasSetting::NoBias
    } else {
        BiasSetting::Single90
    };
    let spec = setting.spec()?;
    let view = build_splits(&spec, cfg.n, 1.0, cfg.seed)?.training_view();
    let clf = train_classifier(
        &view,
        &ClassifierHyper {
            seed: cfg.seed,
            ..cfg.classifier.clone()
        },
    )?;
    let xs = highest_density_grid(
        |x| spec.true_density(Which::Ref, &[x]).unwrap_or(0.0),
        GRID_LO,
        GRID_HI,
        GRID_POINTS,
        cfg.coverage,
    );
    let grid = xs
        .iter()
        .map(|&x| {
            Ok(ToyPoint {
                x,
                estimated: clf.importance_weight(&[x])?.value,
                bayes: 1.0 / spec.bayes_ratio(&[x])?,
            })
        })
        .collect::<fairweight::Result<Vec<_>>>()?;
    let central = highest_density_grid(
        |x| spec.true_density(Which::Ref, &[x]).unwrap_or(0.0),
        GRID_LO,
        GRID_HI,
        GRID_POINTS,
        CENTRAL_MASS,
    );
    let mut central_range = [f64::INFINITY, f64::NEG_INFINITY];
    for &x in &central {
        let w = clf.importance_weight(&[x])?.value;
        central_range = [central_range[0].min(w), central_range[1].max(w)];
    }
    let rel: Vec<f64> = grid.iter().map(|p| (p.estimated - p.bayes).abs() / p.bayes).collect();
    let est = grid.iter().map(|p| p.estimated);
    Ok(ToyReport {
        config: cfg.clone(),
        median_relative_error: median(rel),
        min_estimated: est.clone().fold(f64::INFINITY, f64::min),
        max_estimated: est.fold(f64::NEG_INFINITY, f64::max),
        central_range,
        grid,
    })
}

pub fn write_toy_csv(path: &Path, report: &ToyReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["x", "estimated_ratio", "bayes_ratio"])?;
    for p in &report.grid {
        w.write_record([p.x.to_string(), p.estimated.to_string(), p.bayes.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Static two-line plot of estimated and Bayes ratios on a log scale.
pub fn render_svg(report: &ToyReport) -> String {
    let (w, h, m) = (640.0, 400.0, 40.0);
    let xs = report.grid.iter().map(|p| p.x);
    let ys = report.grid.iter().flat_map(|p| [p.estimated.ln(), p.bayes.ln()]);
    let (x0, x1) = (
        xs.clone().fold(f64::INFINITY, f64::min),
        xs.fold(f64::NEG_INFINITY, f64::max),
    );
    let (y0, y1) = (
        ys.clone().fold(f64::INFINITY, f64::min),
        ys.fold(f64::NEG_INFINITY, f64::max),
    );
    let sx = |x: f64| m + (x - x0) / (x1 - x0).max(1e-12) * (w - 2.0 * m);
    let sy = |y: f64| h - m - (y - y0) / (y1 - y0).max(1e-12) * (h - 2.0 * m);
    let line = |f: &dyn Fn(&ToyPoint) -> f64| {
        report.grid.iter().fold(String::new(), |mut s, p| {
            let _ = write!(s, "{:.2},{:.2} ", sx(p.x), sy(f(p).ln()));
            s
        })
    };
    format!(
        concat!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\">",
            "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>",
            "<polyline fill=\"none\" stroke=\"black\" stroke-width=\"2\" points=\"{bayes}\"/>",
            "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-dasharray=\"6 3\" stroke-width=\"2\" points=\"{est}\"/>",
            "<text x=\"{m}\" y=\"20\" font-family=\"sans-serif\" font-size=\"12\">log ratio: Bayes (solid), estimated (dashed)</text>",
            "</svg>\n"
        ),
        w = w,
        h = h,
        m = m,
        bayes = line(&|p| p.bayes),
        est = line(&|p| p.estimated),
    )
}

pub fn write_svg(path: &Path, report: &ToyReport) -> Result<()> {
    std::fs::write(path, render_svg(report)).map_err(|source| CliError::Unwritable {
        path: path.to_path_buf(),
        source,
    })
}
