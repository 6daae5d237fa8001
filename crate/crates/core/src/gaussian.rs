//! Multivariate Gaussians and the small dense linear algebra shared by the
//! mixture code and the evaluation metrics.
//!
//! Matrices cross module boundaries as row-major `Vec<f64>`; nalgebra is used
//! only for factorizations.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_5;
const SYMMETRY_TOL: f64 = 1e-10;

/// A Gaussian with a cached Cholesky factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GaussianDoc", into = "GaussianDoc")]
pub struct Gaussian {
    mean: Vec<f64>,
    cov: Vec<f64>,
    chol: Vec<f64>,
    log_norm: f64,
}

#[derive(Serialize, Deserialize)]
struct GaussianDoc {
    mean: Vec<f64>,
    covariance: Vec<f64>,
}

impl TryFrom<GaussianDoc> for Gaussian {
    type Error = Error;
    fn try_from(doc: GaussianDoc) -> Result<Self> {
        Gaussian::new(doc.mean, doc.covariance)
    }
}

impl From<Gaussian> for GaussianDoc {
    fn from(g: Gaussian) -> Self {
        GaussianDoc {
            mean: g.mean,
            covariance: g.cov,
        }
    }
}

impl Gaussian {
    /// `cov` is the row-major `d×d` covariance.
    pub fn new(mean: Vec<f64>, cov: Vec<f64>) -> Result<Self> {
        let d = mean.len();
        if d == 0 {
            return Err(crate::error::invalid("mean", "zero-dimensional Gaussian"));
        }
        if cov.len() != d * d {
            return Err(Error::DimensionMismatch {
                expected: d * d,
                got: cov.len(),
            });
        }
        if mean.iter().chain(cov.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("Gaussian parameters"));
        }
        if !is_symmetric(&cov, d) {
            return Err(Error::NotPositiveDefinite);
        }
        let chol = cholesky(&cov, d).ok_or(Error::NotPositiveDefinite)?;
        let log_det: f64 = (0..d).map(|i| 2.0 * chol[i * d + i].ln()).sum();
        let log_norm = -0.5 * (d as f64 * LN_2PI + log_det);
        Ok(Self {
            mean,
            cov,
            chol,
            log_norm,
        })
    }

    pub fn isotropic(mean: Vec<f64>, variance: f64) -> Result<Self> {
        let d = mean.len();
        Self::new(mean, scaled_identity(d, variance))
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// Row-major covariance.
    pub fn covariance(&self) -> &[f64] {
        &self.cov
    }

    pub fn log_pdf(&self, x: &[f64]) -> f64 {
        let d = self.dim();
        debug_assert_eq!(x.len(), d);
        // forward substitution L y = x - mean
        let mut y = [0.0f64; 8];
        let mut y_heap;
        let y: &mut [f64] = if d <= 8 {
            &mut y[..d]
        } else {
            y_heap = vec![0.0; d];
            &mut y_heap
        };
        let mut quad = 0.0;
        for i in 0..d {
            let mut s = x[i] - self.mean[i];
            for j in 0..i {
                s -= self.chol[i * d + j] * y[j];
            }
            y[i] = s / self.chol[i * d + i];
            quad += y[i] * y[i];
        }
        self.log_norm - 0.5 * quad
    }

    pub fn pdf(&self, x: &[f64]) -> f64 {
        self.log_pdf(x).exp()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let d = self.dim();
        let eps: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        (0..d)
            .map(|i| self.mean[i] + (0..=i).map(|j| self.chol[i * d + j] * eps[j]).sum::<f64>())
            .collect()
    }

    /// Bhattacharyya coefficient `exp(-D_B)`; 1 for identical
    /// distributions, near 0 for well-separated ones.
    pub fn bhattacharyya_coefficient(&self, other: &Gaussian) -> Result<f64> {
        let d = self.dim();
        if other.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: other.dim(),
            });
        }
        let avg: Vec<f64> = self.cov.iter().zip(&other.cov).map(|(a, b)| 0.5 * (a + b)).collect();
        let pooled = Gaussian::new(vec![0.0; d], avg)?;
        let diff: Vec<f64> = self.mean.iter().zip(&other.mean).map(|(a, b)| a - b).collect();
        // -2 (log_pdf(diff) - log_norm) is the Mahalanobis term diff' S^-1 diff
        let maha = -2.0 * (pooled.log_pdf(&diff) - pooled.log_norm);
        let half_log_det = |g: &Gaussian| -(g.log_norm + 0.5 * d as f64 * LN_2PI);
        let log_det_pooled = 2.0 * half_log_det(&pooled);
        let log_det_a = 2.0 * half_log_det(self);
        let log_det_b = 2.0 * half_log_det(other);
        let distance = maha / 8.0 + 0.5 * (log_det_pooled - 0.5 * (log_det_a + log_det_b));
        Ok((-distance).exp())
    }
}

pub fn scaled_identity(d: usize, value: f64) -> Vec<f64> {
    let mut m = vec![0.0; d * d];
    for i in 0..d {
        m[i * d + i] = value;
    }
    m
}

pub fn is_symmetric(m: &[f64], d: usize) -> bool {
    let scale = m.iter().fold(1.0f64, |acc, v| acc.max(v.abs()));
    (0..d).all(|i| (0..i).all(|j| (m[i * d + j] - m[j * d + i]).abs() <= SYMMETRY_TOL * scale))
}

/// Lower Cholesky factor, row-major; `None` if not positive definite.
fn cholesky(m: &[f64], d: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..=i {
            let mut s = m[i * d + j];
            for k in 0..j {
                s -= l[i * d + k] * l[j * d + k];
            }
            if i == j {
                if s <= 0.0 || !s.is_finite() {
                    return None;
                }
                l[i * d + i] = s.sqrt();
            } else {
                l[i * d + j] = s / l[j * d + j];
            }
        }
    }
    Some(l)
}

fn to_matrix(m: &[f64], d: usize) -> DMatrix<f64> {
    DMatrix::from_row_slice(d, d, m)
}

fn from_matrix(m: &DMatrix<f64>) -> Vec<f64> {
    let d = m.nrows();
    let mut out = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            out[i * d + j] = m[(i, j)];
        }
    }
    out
}

fn symmetrize(m: &[f64], d: usize) -> DMatrix<f64> {
    let a = to_matrix(m, d);
    (&a + a.transpose()) * 0.5
}

/// Clamps the eigenvalues of a symmetric matrix from below. Returns the
/// repaired matrix and whether any eigenvalue was raised.
pub fn floor_eigenvalues(m: &[f64], d: usize, floor: f64) -> (Vec<f64>, bool) {
    let eig = SymmetricEigen::new(symmetrize(m, d));
    if eig.eigenvalues.iter().all(|&l| l >= floor) {
        return (m.to_vec(), false);
    }
    let clamped = eig.eigenvalues.map(|l| l.max(floor));
    let rebuilt = &eig.eigenvectors * DMatrix::from_diagonal(&clamped) * eig.eigenvectors.transpose();
    let mut out = from_matrix(&rebuilt);
    // exact symmetry for the Cholesky check downstream
    for i in 0..d {
        for j in 0..i {
            let v = 0.5 * (out[i * d + j] + out[j * d + i]);
            out[i * d + j] = v;
            out[j * d + i] = v;
        }
    }
    (out, true)
}

/// Principal square root of a symmetric PSD matrix. Eigenvalues in
/// `[-tol, 0)` are treated as zero; anything more negative is an error.
pub fn sqrt_psd(m: &[f64], d: usize, tol: f64) -> Result<Vec<f64>> {
    let eig = SymmetricEigen::new(symmetrize(m, d));
    let min = eig.eigenvalues.min();
    if min < -tol {
        return Err(Error::NotPositiveSemidefinite(min));
    }
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    let r = &eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose();
    Ok(from_matrix(&r))
}

pub fn eigenvalues_symmetric(m: &[f64], d: usize) -> Vec<f64> {
    SymmetricEigen::new(symmetrize(m, d))
        .eigenvalues
        .iter()
        .copied()
        .collect()
}

pub fn matmul(a: &[f64], b: &[f64], d: usize) -> Vec<f64> {
    let mut out = vec![0.0; d * d];
    for i in 0..d {
        for k in 0..d {
            let aik = a[i * d + k];
            for j in 0..d {
                out[i * d + j] += aik * b[k * d + j];
            }
        }
    }
    out
}

pub fn transpose(a: &[f64], d: usize) -> Vec<f64> {
    let mut out = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            out[j * d + i] = a[i * d + j];
        }
    }
    out
}

pub fn trace(a: &[f64], d: usize) -> f64 {
    (0..d).map(|i| a[i * d + i]).sum()
}

/// Numerically stable `log Σ exp(v)`; `-inf` for an empty or all `-inf` input.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn univariate_pdf_matches_closed_form() {
        let g = Gaussian::isotropic(vec![-2.0], 0.25).unwrap();
        // 1 / sqrt(2 pi 0.25)
        let peak = 1.0 / (2.0 * std::f64::consts::PI * 0.25).sqrt();
        assert!((g.pdf(&[-2.0]) - peak).abs() < 1e-14);
        let x: f64 = -1.3;
        let expected = peak * (-(x + 2.0) * (x + 2.0) / (2.0 * 0.25)).exp();
        assert!((g.pdf(&[x]) - expected).abs() < 1e-14);
    }

    #[test]
    fn bivariate_pdf_with_correlation() {
        let cov = vec![1.0, 0.5, 0.5, 2.0];
        let g = Gaussian::new(vec![1.0, -1.0], cov).unwrap();
        let det: f64 = 1.0 * 2.0 - 0.25;
        let inv = [2.0 / det, -0.5 / det, -0.5 / det, 1.0 / det];
        let x = [0.3, 0.4];
        let dx = [x[0] - 1.0, x[1] + 1.0];
        let quad = dx[0] * (inv[0] * dx[0] + inv[1] * dx[1]) + dx[1] * (inv[2] * dx[0] + inv[3] * dx[1]);
        let expected = (-0.5 * quad).exp() / (2.0 * std::f64::consts::PI * det.sqrt());
        assert!((g.pdf(&x) - expected).abs() < 1e-14);
    }

    #[test]
    fn rejects_non_spd() {
        assert!(matches!(
            Gaussian::new(vec![0.0, 0.0], vec![1.0, 2.0, 2.0, 1.0]),
            Err(Error::NotPositiveDefinite)
        ));
        assert!(matches!(
            Gaussian::new(vec![0.0, 0.0], vec![1.0, 0.3, 0.0, 1.0]),
            Err(Error::NotPositiveDefinite)
        ));
    }

    #[test]
    fn sample_moments() {
        let g = Gaussian::new(vec![1.0, 2.0], vec![1.0, 0.6, 0.6, 0.5]).unwrap();
        let mut r = rng::stream(3, 0);
        let n = 50_000;
        let xs: Vec<Vec<f64>> = (0..n).map(|_| g.sample(&mut r)).collect();
        let m0 = xs.iter().map(|x| x[0]).sum::<f64>() / n as f64;
        let m1 = xs.iter().map(|x| x[1]).sum::<f64>() / n as f64;
        let c01 = xs.iter().map(|x| (x[0] - m0) * (x[1] - m1)).sum::<f64>() / n as f64;
        assert!((m0 - 1.0).abs() < 0.03);
        assert!((m1 - 2.0).abs() < 0.03);
        assert!((c01 - 0.6).abs() < 0.03);
    }

    #[test]
    fn bhattacharyya_identical_and_separated() {
        let a = Gaussian::isotropic(vec![-2.0], 0.25).unwrap();
        let b = Gaussian::isotropic(vec![2.0], 0.25).unwrap();
        assert!((a.bhattacharyya_coefficient(&a).unwrap() - 1.0).abs() < 1e-12);
        // D_B = (1/8) 16 / 0.25 = 8
        assert!((a.bhattacharyya_coefficient(&b).unwrap() - (-8.0f64).exp()).abs() < 1e-14);
    }

    #[test]
    fn eigen_floor_and_sqrt() {
        let (m, floored) = floor_eigenvalues(&[1e-9, 0.0, 0.0, 2.0], 2, 1e-6);
        assert!(floored);
        assert!((m[0] - 1e-6).abs() < 1e-15 && (m[3] - 2.0).abs() < 1e-12);
        let s = sqrt_psd(&[4.0, 0.0, 0.0, 9.0], 2, 1e-8).unwrap();
        assert!((s[0] - 2.0).abs() < 1e-12 && (s[3] - 3.0).abs() < 1e-12);
        assert!(sqrt_psd(&[-1.0, 0.0, 0.0, 1.0], 2, 1e-8).is_err());
    }

    #[test]
    fn log_sum_exp_edge_cases() {
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY, f64::NEG_INFINITY]), f64::NEG_INFINITY);
        assert!((log_sum_exp(&[-1000.0, -1000.0]) - (-1000.0 + 2f64.ln())).abs() < 1e-12);
    }
}
