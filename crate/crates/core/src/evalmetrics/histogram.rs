use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::genmodel::WeightedDataset;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
}

/// Weights of the biased points in one hidden subgroup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubgroupWeightSummary {
    pub subgroup: usize,
    pub count: usize,
    pub mean: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub bins: Vec<HistogramBin>,
    pub downweighted: bool,
    pub upweighted: bool,
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Summaries over biased points only. `z_labels` aligns with `wd.points`;
/// bins share one range across subgroups.
pub fn weight_histogram_by_subgroup(
    wd: &WeightedDataset,
    z_labels: &[usize],
    n_bins: usize,
) -> Result<Vec<SubgroupWeightSummary>> {
    if z_labels.len() != wd.len() {
        return Err(Error::DimensionMismatch {
            expected: wd.len(),
            got: z_labels.len(),
        });
    }
    let n_bins = n_bins.max(1);
    let biased: Vec<(usize, f64)> = wd
        .origins
        .iter()
        .zip(z_labels)
        .zip(&wd.weights)
        .filter(|((y, _), _)| **y == 0)
        .map(|((_, &z), &w)| (z, w))
        .collect();
    let n_groups = biased.iter().map(|(z, _)| z + 1).max().unwrap_or(0);
    let lo = biased.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let hi = biased.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let width = if hi > lo { (hi - lo) / n_bins as f64 } else { 1.0 };

    let mut out = Vec::new();
    for g in 0..n_groups {
        let mut ws: Vec<f64> = biased.iter().filter(|(z, _)| *z == g).map(|p| p.1).collect();
        if ws.is_empty() {
            continue;
        }
        ws.sort_by(f64::total_cmp);
        let mean = ws.iter().sum::<f64>() / ws.len() as f64;
        let mut bins: Vec<HistogramBin> = (0..n_bins)
            .map(|b| HistogramBin {
                lower: lo + b as f64 * width,
                upper: lo + (b + 1) as f64 * width,
                count: 0,
            })
            .collect();
        for &w in &ws {
            let b = (((w - lo) / width) as usize).min(n_bins - 1);
            bins[b].count += 1;
        }
        out.push(SubgroupWeightSummary {
            subgroup: g,
            count: ws.len(),
            mean,
            q1: quantile(&ws, 0.25),
            median: quantile(&ws, 0.5),
            q3: quantile(&ws, 0.75),
            bins,
            downweighted: mean < 1.0,
            upweighted: mean > 1.0,
        });
    }
    Ok(out)
}
