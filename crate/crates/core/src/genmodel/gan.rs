//! Small hinge-loss GAN whose discriminator sees importance-weighted real data.

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{GenerativeModel, WeightedDataset};
use crate::error::{invalid, Error, Result};
use crate::nnet::{init, step, Activation, Gradients, MlpParams, OptimizerState};
use crate::rng::{self, child_seed, streams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GanHyper {
    pub latent_dim: usize,
    pub hidden: Vec<usize>,
    pub lr_generator: f64,
    pub lr_discriminator: f64,
    pub steps: usize,
    pub batch_size: usize,
    pub discriminator_steps: usize,
    /// A loss with magnitude above this aborts training.
    pub divergence_threshold: f64,
    pub seed: u64,
}

impl Default for GanHyper {
    fn default() -> Self {
        Self {
            latent_dim: 2,
            hidden: vec![32, 32],
            lr_generator: 1e-3,
            lr_discriminator: 1e-3,
            steps: 1500,
            batch_size: 64,
            discriminator_steps: 4,
            divergence_threshold: 1e3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GanLogRecord {
    pub step: usize,
    pub discriminator_loss: f64,
    pub generator_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GanModel {
    pub generator: MlpParams,
    pub discriminator: MlpParams,
    pub latent_dim: usize,
    pub log: Vec<GanLogRecord>,
}

impl GenerativeModel for GanModel {
    fn dim(&self) -> usize {
        self.generator.output_dim()
    }

    fn sample(&self, n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
        let mut r = rng::stream(seed, streams::MODEL_SAMPLE);
        (0..n)
            .map(|_| {
                let z: Vec<f64> = (0..self.latent_dim).map(|_| r.sample(StandardNormal)).collect();
                self.generator.forward(&z)
            })
            .collect()
    }
}

fn sizes(input: usize, hidden: &[usize], output: usize) -> Vec<usize> {
    std::iter::once(input)
        .chain(hidden.iter().copied())
        .chain(std::iter::once(output))
        .collect()
}

/// Discriminator loss `E_real[ω max(0, 1 - D)] + E_fake[max(0, 1 + D)]`,
/// generator loss `-E_fake[D]`. Weights are rescaled to mean 1 over the
/// dataset so the learning rate does not depend on their scale.
pub fn fit_weighted_gan(data: &WeightedDataset, hyper: &GanHyper) -> Result<GanModel> {
    let d = data.dim().ok_or(Error::EmptyData("dataset"))?;
    if hyper.latent_dim == 0 || hyper.batch_size == 0 || hyper.discriminator_steps == 0 {
        return Err(invalid(
            "gan",
            "latent_dim, batch_size and discriminator_steps must be positive",
        ));
    }
    let mean_w = data.total_weight() / data.len() as f64;
    if !(mean_w > 0.0 && mean_w.is_finite()) {
        return Err(Error::EmptyData("total weight is zero"));
    }
    let act = Activation::Tanh;
    let mut gen = init(
        &sizes(hyper.latent_dim, &hyper.hidden, d),
        act,
        child_seed(hyper.seed, 0),
    )?;
    let mut disc = init(&sizes(d, &hyper.hidden, 1), act, child_seed(hyper.seed, 1))?;
    let mut opt_g = OptimizerState::adam_with(hyper.lr_generator, 0.5, 0.999, 1e-8, &gen);
    let mut opt_d = OptimizerState::adam_with(hyper.lr_discriminator, 0.5, 0.999, 1e-8, &disc);
    let mut r = rng::stream(hyper.seed, streams::GAN);
    let b = hyper.batch_size;
    let inv_b = 1.0 / b as f64;
    let mut log = Vec::with_capacity(hyper.steps);

    let latent = |r: &mut rng::Rng| -> Vec<f64> { (0..hyper.latent_dim).map(|_| r.sample(StandardNormal)).collect() };

    for s in 0..hyper.steps {
        let mut d_loss = 0.0;
        for _ in 0..hyper.discriminator_steps {
            let mut grads = Gradients::zeros_like(&disc);
            d_loss = 0.0;
            for _ in 0..b {
                let i = r.random_range(0..data.len());
                let w = data.weights[i] / mean_w;
                if w != 0.0 {
                    let t = disc.trace(&data.points[i])?;
                    let out = t.output()[0];
                    if out < 1.0 {
                        d_loss += w * (1.0 - out) * inv_b;
                        disc.backward(&t, &[-w * inv_b], &mut grads);
                    }
                }
                let fake = gen.forward(&latent(&mut r))?;
                let t = disc.trace(&fake)?;
                let out = t.output()[0];
                if out > -1.0 {
                    d_loss += (1.0 + out) * inv_b;
                    disc.backward(&t, &[inv_b], &mut grads);
                }
            }
            step(&mut disc, &grads, &mut opt_d)?;
        }

        let mut g_grads = Gradients::zeros_like(&gen);
        let mut scratch = Gradients::zeros_like(&disc);
        let mut g_loss = 0.0;
        for _ in 0..b {
            let tg = gen.trace(&latent(&mut r))?;
            let td = disc.trace(tg.output())?;
            g_loss -= td.output()[0] * inv_b;
            let d_fake = disc.backward(&td, &[-inv_b], &mut scratch);
            gen.backward(&tg, &d_fake, &mut g_grads);
        }
        step(&mut gen, &g_grads, &mut opt_g)?;

        if !(d_loss.is_finite() && g_loss.is_finite())
            || d_loss.abs() > hyper.divergence_threshold
            || g_loss.abs() > hyper.divergence_threshold
        {
            return Err(Error::Diverged {
                step: s,
                loss: if d_loss.is_finite() && d_loss.abs() > g_loss.abs() {
                    d_loss
                } else {
                    g_loss
                },
            });
        }
        log.push(GanLogRecord {
            step: s,
            discriminator_loss: d_loss,
            generator_loss: g_loss,
        });
    }
    Ok(GanModel {
        generator: gen,
        discriminator: disc,
        latent_dim: hyper.latent_dim,
        log,
    })
}
