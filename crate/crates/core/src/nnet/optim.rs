use serde::{Deserialize, Serialize};

use super::{Gradients, MlpParams};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub kind: OptimizerKind,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// First and second moments, flattened like [`MlpParams::to_vec`].
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl OptimizerState {
    pub fn sgd(lr: f64) -> Self {
        Self {
            kind: OptimizerKind::Sgd,
            lr,
            beta1: 0.0,
            beta2: 0.0,
            eps: 0.0,
            m: Vec::new(),
            v: Vec::new(),
            t: 0,
        }
    }

    pub fn adam(lr: f64, params: &MlpParams) -> Self {
        Self::adam_with(lr, 0.9, 0.999, 1e-8, params)
    }

    pub fn adam_with(lr: f64, beta1: f64, beta2: f64, eps: f64, params: &MlpParams) -> Self {
        let n = params.param_count();
        Self {
            kind: OptimizerKind::Adam,
            lr,
            beta1,
            beta2,
            eps,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }
}

/// One optimizer update in place.
pub fn step(params: &mut MlpParams, grads: &Gradients, state: &mut OptimizerState) -> Result<()> {
    if grads.layers.len() != params.layers.len()
        || grads
            .layers
            .iter()
            .zip(&params.layers)
            .any(|(g, p)| g.weights.len() != p.weights.len() || g.bias.len() != p.bias.len())
    {
        return Err(Error::DimensionMismatch {
            expected: params.param_count(),
            got: grads.to_vec().len(),
        });
    }
    state.t += 1;
    let pairs = params.layers.iter_mut().zip(&grads.layers).flat_map(|(p, g)| {
        p.weights
            .iter_mut()
            .zip(&g.weights)
            .chain(p.bias.iter_mut().zip(&g.bias))
    });
    match state.kind {
        OptimizerKind::Sgd => {
            for (p, g) in pairs {
                *p -= state.lr * g;
            }
        }
        OptimizerKind::Adam => {
            if state.m.len() != params_len(grads) {
                return Err(Error::DimensionMismatch {
                    expected: state.m.len(),
                    got: params_len(grads),
                });
            }
            let t = state.t as i32;
            let bc1 = 1.0 - state.beta1.powi(t);
            let bc2 = 1.0 - state.beta2.powi(t);
            for (i, (p, g)) in pairs.enumerate() {
                let m = &mut state.m[i];
                let v = &mut state.v[i];
                *m = state.beta1 * *m + (1.0 - state.beta1) * g;
                *v = state.beta2 * *v + (1.0 - state.beta2) * g * g;
                let m_hat = *m / bc1;
                let v_hat = *v / bc2;
                *p -= state.lr * m_hat / (v_hat.sqrt() + state.eps);
            }
        }
    }
    Ok(())
}

fn params_len(grads: &Gradients) -> usize {
    grads.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
}
