use super::{Gradients, MlpParams};
use crate::error::{invalid, Error, Result};

/// One weighted binary example.
#[derive(Debug, Clone, Copy)]
pub struct Example<'a> {
    pub x: &'a [f64],
    /// 0 or 1.
    pub y: f64,
    pub weight: f64,
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^z)` without overflow.
pub fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Binary cross-entropy of a logit: `softplus(z) - y z`.
pub fn bce_loss(logit: f64, y: f64) -> f64 {
    softplus(logit) - y * logit
}

fn check_batch(params: &MlpParams, batch: &[Example<'_>]) -> Result<()> {
    if batch.is_empty() {
        return Err(invalid("batch", "empty batch"));
    }
    if params.output_dim() != 1 {
        return Err(invalid("head", "binary cross-entropy needs a logit head"));
    }
    for e in batch {
        if !(e.weight.is_finite() && e.weight >= 0.0) {
            return Err(Error::NonFinite("example weight"));
        }
        if e.y != 0.0 && e.y != 1.0 {
            return Err(invalid("y", "labels must be 0 or 1"));
        }
        if e.x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("example features"));
        }
    }
    Ok(())
}

/// `(1/|B|) Σ ω_i BCE(σ(f(x_i)), y_i)` and its exact gradient.
pub fn weighted_bce_grad(params: &MlpParams, batch: &[Example<'_>]) -> Result<(f64, Gradients)> {
    check_batch(params, batch)?;
    let inv_n = 1.0 / batch.len() as f64;
    let mut grads = Gradients::zeros_like(params);
    let mut loss = 0.0;
    for e in batch {
        let trace = params.trace(e.x)?;
        let z = trace.output()[0];
        loss += e.weight * bce_loss(z, e.y);
        if e.weight != 0.0 {
            let dz = e.weight * (sigmoid(z) - e.y) * inv_n;
            params.backward(&trace, &[dz], &mut grads);
        }
    }
    Ok((loss * inv_n, grads))
}

pub(crate) fn weighted_bce(params: &MlpParams, batch: &[Example<'_>]) -> Result<f64> {
    check_batch(params, batch)?;
    let mut loss = 0.0;
    for e in batch {
        loss += e.weight * bce_loss(params.logit(e.x)?, e.y);
    }
    Ok(loss / batch.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nnet::{init, Activation};

    #[test]
    fn stable_primitives() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(-800.0) >= 0.0 && sigmoid(800.0) == 1.0);
        assert!((softplus(0.0) - 2f64.ln()).abs() < 1e-15);
        assert_eq!(softplus(800.0), 800.0);
        assert!(softplus(-800.0) >= 0.0);
        assert!((bce_loss(-1000.0, 0.0)).abs() < 1e-300);
    }

    #[test]
    fn zero_weights_annihilate() {
        let p = init(&[1, 4, 1], Activation::Tanh, 0).unwrap();
        let xs = [[0.5], [-1.0], [2.0]];
        let batch: Vec<Example> = xs
            .iter()
            .enumerate()
            .map(|(i, x)| Example {
                x,
                y: (i % 2) as f64,
                weight: 0.0,
            })
            .collect();
        let (loss, g) = weighted_bce_grad(&p, &batch).unwrap();
        assert_eq!(loss, 0.0);
        assert_eq!(g.max_abs(), 0.0);
    }

    #[test]
    fn zero_logits_give_log_two() {
        let mut p = init(&[2, 3, 1], Activation::Tanh, 0).unwrap();
        p.set_from_slice(&vec![0.0; p.param_count()]).unwrap();
        let xs = [[1.0, 2.0], [0.0, -3.0]];
        let batch: Vec<Example> = xs
            .iter()
            .enumerate()
            .map(|(i, x)| Example {
                x,
                y: (i % 2) as f64,
                weight: 1.0,
            })
            .collect();
        let (loss, _) = weighted_bce_grad(&p, &batch).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_inputs() {
        let p = init(&[1, 1], Activation::Tanh, 0).unwrap();
        let x = [f64::NAN];
        assert!(weighted_bce_grad(
            &p,
            &[Example {
                x: &x,
                y: 1.0,
                weight: 1.0
            }]
        )
        .is_err());
        let x = [1.0];
        assert!(weighted_bce_grad(
            &p,
            &[Example {
                x: &x,
                y: 1.0,
                weight: -1.0
            }]
        )
        .is_err());
        assert!(weighted_bce_grad(
            &p,
            &[Example {
                x: &x,
                y: 0.5,
                weight: 1.0
            }]
        )
        .is_err());
        assert!(weighted_bce_grad(&p, &[]).is_err());
    }
}
