use rand::seq::index;

use super::loss::weighted_bce;
use super::{weighted_bce_grad, Example, Gradients, MlpParams};
use crate::error::Result;
use crate::rng::{self, streams};

const CHECK_FRACTION: f64 = 0.05;
/// Denominator floor so coordinates with vanishing gradient do not blow up
/// the relative error.
const RELATIVE_FLOOR: f64 = 1e-6;

/// Max relative error between `analytic` and central differences of `loss`
/// over a seeded 5% subset of coordinates (at least one).
pub fn finite_difference_error<F>(
    params: &MlpParams,
    analytic: &Gradients,
    loss: F,
    fd_step: f64,
    seed: u64,
) -> Result<f64>
where
    F: Fn(&MlpParams) -> Result<f64>,
{
    if !(fd_step > 0.0) {
        return Err(crate::error::invalid("fd_step", "must be positive"));
    }
    let n = params.param_count();
    let m = ((n as f64 * CHECK_FRACTION).ceil() as usize).clamp(1, n);
    let mut r = rng::stream(seed, streams::GRAD_CHECK);
    let coords = index::sample(&mut r, n, m);
    let flat = analytic.to_vec();
    let mut probe = params.clone();
    let mut worst = 0.0f64;
    for i in coords.iter() {
        let orig = *probe.param_mut(i);
        *probe.param_mut(i) = orig + fd_step;
        let up = loss(&probe)?;
        *probe.param_mut(i) = orig - fd_step;
        let down = loss(&probe)?;
        *probe.param_mut(i) = orig;
        let numeric = (up - down) / (2.0 * fd_step);
        let a = flat[i];
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(RELATIVE_FLOOR);
        worst = worst.max(rel);
    }
    Ok(worst)
}

/// Gradient check of [`weighted_bce_grad`] on `batch`.
pub fn grad_check(params: &MlpParams, batch: &[Example<'_>], fd_step: f64, seed: u64) -> Result<f64> {
    let (_, grads) = weighted_bce_grad(params, batch)?;
    finite_difference_error(params, &grads, |p| weighted_bce(p, batch), fd_step, seed)
}
