//! Assigning fitted mixture components to the generating subgroups.

use super::GmmModel;
use crate::error::{Error, Result};
use crate::synthdata::{SubgroupSpec, MAX_SUBGROUPS};

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `out[k]` is the fitted component assigned to target `k`. With equal
/// counts the assignment is the permutation minimizing total squared mean
/// distance (exhaustive search, at most `8!` candidates); otherwise each
/// target takes its nearest component.
pub fn match_components(fitted: &[Vec<f64>], targets: &[Vec<f64>]) -> Result<Vec<usize>> {
    if fitted.is_empty() || targets.is_empty() {
        return Err(Error::EmptyData("means"));
    }
    if fitted.len() != targets.len() || fitted.len() > MAX_SUBGROUPS {
        return Ok(targets
            .iter()
            .map(|t| {
                (0..fitted.len())
                    .min_by(|&a, &b| sq_dist(&fitted[a], t).total_cmp(&sq_dist(&fitted[b], t)))
                    .expect("nonempty")
            })
            .collect());
    }
    let k = targets.len();
    let cost: Vec<Vec<f64>> = targets
        .iter()
        .map(|t| fitted.iter().map(|f| sq_dist(f, t)).collect())
        .collect();
    let mut perm: Vec<usize> = (0..k).collect();
    let mut best = perm.clone();
    let mut best_cost = f64::INFINITY;
    permute(&mut perm, 0, &cost, &mut best, &mut best_cost);
    Ok(best)
}

fn permute(perm: &mut Vec<usize>, i: usize, cost: &[Vec<f64>], best: &mut Vec<usize>, best_cost: &mut f64) {
    if i == perm.len() {
        let c: f64 = perm.iter().enumerate().map(|(t, &f)| cost[t][f]).sum();
        if c < *best_cost {
            *best_cost = c;
            best.clone_from(perm);
        }
        return;
    }
    for j in i..perm.len() {
        perm.swap(i, j);
        permute(perm, i + 1, cost, best, best_cost);
        perm.swap(i, j);
    }
}

/// Mixture mass attributed to each subgroup. Components are assigned to
/// their nearest subgroup mean when the counts differ.
pub fn subgroup_masses(model: &GmmModel, spec: &SubgroupSpec) -> Result<Vec<f64>> {
    let targets: Vec<Vec<f64>> = spec.components().iter().map(|c| c.mean().to_vec()).collect();
    let fitted = model.means();
    if fitted.len() == targets.len() {
        let m = match_components(&fitted, &targets)?;
        return Ok(m.iter().map(|&c| model.weights[c]).collect());
    }
    let owner = match_components(&targets, &fitted)?;
    let mut mass = vec![0.0; targets.len()];
    for (c, &k) in owner.iter().enumerate() {
        mass[k] += model.weights[c];
    }
    Ok(mass)
}

/// Sum over subgroups of the Euclidean distance between the true mean and
/// its matched fitted mean.
pub fn mean_estimation_error(model: &GmmModel, spec: &SubgroupSpec) -> Result<f64> {
    let targets: Vec<Vec<f64>> = spec.components().iter().map(|c| c.mean().to_vec()).collect();
    let fitted = model.means();
    let m = match_components(&fitted, &targets)?;
    Ok(m.iter()
        .zip(&targets)
        .map(|(&c, t)| sq_dist(&fitted[c], t).sqrt())
        .sum())
}
