use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{eigenvalues_symmetric, is_symmetric, matmul, sqrt_psd, trace};
use crate::synthdata::{self, SubgroupSpec, Which};

/// Eigenvalues down to `-PSD_TOL` are read as zero.
pub const PSD_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianMoments {
    pub mean: Vec<f64>,
    /// Row-major.
    pub cov: Vec<f64>,
}

impl GaussianMoments {
    pub fn new(mean: Vec<f64>, cov: Vec<f64>) -> Result<Self> {
        let d = mean.len();
        if cov.len() != d * d {
            return Err(Error::DimensionMismatch {
                expected: d * d,
                got: cov.len(),
            });
        }
        if !is_symmetric(&cov, d) {
            return Err(Error::NotPositiveSemidefinite(f64::NAN));
        }
        let min = eigenvalues_symmetric(&cov, d).into_iter().fold(f64::INFINITY, f64::min);
        if d > 0 && min < -PSD_TOL {
            return Err(Error::NotPositiveSemidefinite(min));
        }
        Ok(Self { mean, cov })
    }

    /// Sample mean and unbiased sample covariance.
    pub fn from_samples(xs: &[Vec<f64>]) -> Result<Self> {
        if xs.len() < 2 {
            return Err(Error::EmptyData("need at least two samples"));
        }
        let d = xs[0].len();
        let n = xs.len() as f64;
        let mut mean = vec![0.0; d];
        for x in xs {
            if x.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: x.len(),
                });
            }
            mean.iter_mut().zip(x).for_each(|(m, v)| *m += v);
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut cov = vec![0.0; d * d];
        for x in xs {
            for i in 0..d {
                let di = x[i] - mean[i];
                for j in i..d {
                    cov[i * d + j] += di * (x[j] - mean[j]);
                }
            }
        }
        for i in 0..d {
            for j in i..d {
                let v = cov[i * d + j] / (n - 1.0);
                cov[i * d + j] = v;
                cov[j * d + i] = v;
            }
        }
        Self::new(mean, cov)
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// `|μ_a − μ_b|² + tr(Σ_a + Σ_b − 2 (Σ_a Σ_b)^{1/2})`, with the cross term
/// taken as `tr((Σ_a^{1/2} Σ_b Σ_a^{1/2})^{1/2})`, which has the same trace
/// and is symmetric.
pub fn frechet_distance(a: &GaussianMoments, b: &GaussianMoments) -> Result<f64> {
    let d = a.dim();
    if b.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: b.dim(),
        });
    }
    let mean_term: f64 = a.mean.iter().zip(&b.mean).map(|(x, y)| (x - y) * (x - y)).sum();
    let sa = sqrt_psd(&a.cov, d, PSD_TOL)?;
    let inner = matmul(&matmul(&sa, &b.cov, d), &sa, d);
    let cross = trace(&sqrt_psd(&inner, d, PSD_TOL)?, d);
    let value = mean_term + trace(&a.cov, d) + trace(&b.cov, d) - 2.0 * cross;
    Ok(value.max(0.0))
}

/// Moments of `n` draws from the reference distribution of `spec`.
pub fn balanced_reference_moments(spec: &SubgroupSpec, n: usize, seed: u64) -> Result<GaussianMoments> {
    let xs: Vec<Vec<f64>> = synthdata::sample(spec, Which::Ref, n, seed)
        .into_iter()
        .map(|p| p.x)
        .collect();
    GaussianMoments::from_samples(&xs)
}
