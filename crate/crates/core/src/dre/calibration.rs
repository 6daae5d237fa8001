//! Reliability diagrams, expected calibration error, Platt scaling, ROC-AUC.

use serde::{Deserialize, Serialize};

use super::RatioClassifier;
use crate::error::{invalid, Error, Result};
use crate::nnet::{sigmoid, softplus};
use crate::synthdata::TrainingView;

const PLATT_MAX_ITERS: usize = 50;
const PLATT_GRAD_TOL: f64 = 1e-10;
const PLATT_MIN_SLOPE: f64 = 1e-6;

/// `c = σ(a s + b)` on top of a raw score `s`; `a > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Platt {
    pub a: f64,
    pub b: f64,
}

impl Platt {
    pub fn apply(&self, score: f64) -> f64 {
        self.a * score + self.b
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationBin {
    pub lower: f64,
    pub upper: f64,
    pub mean_predicted: f64,
    pub frequency: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    /// Occupied bins only.
    pub bins: Vec<CalibrationBin>,
    /// Count-weighted mean of `|mean_predicted - frequency|`.
    pub ece: f64,
    pub total: usize,
}

/// Equal-width reliability bins over `[0, 1]`.
pub fn calibration_report(probs: &[f64], labels: &[u8], n_bins: usize) -> Result<CalibrationReport> {
    if probs.is_empty() {
        return Err(Error::EmptyData("calibration set"));
    }
    if probs.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: probs.len(),
            got: labels.len(),
        });
    }
    if n_bins == 0 {
        return Err(invalid("n_bins", "need at least one bin"));
    }
    let mut sum_p = vec![0.0; n_bins];
    let mut sum_y = vec![0.0; n_bins];
    let mut count = vec![0usize; n_bins];
    for (&p, &y) in probs.iter().zip(labels) {
        if !(0.0..=1.0).contains(&p) {
            return Err(invalid("probs", format!("probability {p} outside [0, 1]")));
        }
        let bin = ((p * n_bins as f64) as usize).min(n_bins - 1);
        sum_p[bin] += p;
        sum_y[bin] += f64::from(y);
        count[bin] += 1;
    }
    let total = probs.len();
    let mut ece = 0.0;
    let bins = (0..n_bins)
        .filter(|&i| count[i] > 0)
        .map(|i| {
            let n = count[i] as f64;
            let mean_predicted = sum_p[i] / n;
            let frequency = sum_y[i] / n;
            ece += n / total as f64 * (mean_predicted - frequency).abs();
            CalibrationBin {
                lower: i as f64 / n_bins as f64,
                upper: (i + 1) as f64 / n_bins as f64,
                mean_predicted,
                frequency,
                count: count[i],
            }
        })
        .collect();
    Ok(CalibrationReport { bins, ece, total })
}

fn labeled_probs(clf: &RatioClassifier, held_out: &TrainingView) -> Result<(Vec<f64>, Vec<u8>)> {
    let mut probs = Vec::with_capacity(held_out.bias.len() + held_out.reference.len());
    let mut labels = Vec::with_capacity(probs.capacity());
    for (points, y) in [(&held_out.reference, 1u8), (&held_out.bias, 0u8)] {
        for x in points {
            probs.push(sigmoid(clf.logit_at_prior(x, held_out.gamma)?));
            labels.push(y);
        }
    }
    Ok((probs, labels))
}

/// Reliability of `c(Y=1|x)` at the held-out set's prior.
pub fn calibration_curve(clf: &RatioClassifier, held_out: &TrainingView, n_bins: usize) -> Result<CalibrationReport> {
    let (probs, labels) = labeled_probs(clf, held_out)?;
    calibration_report(&probs, &labels, n_bins)
}

/// Class-balanced negative log-likelihood of `σ(a s + b)` with gradient and
/// Hessian in `(a, b)`.
fn platt_objective(scores: &[f64], labels: &[u8], cw: [f64; 2], a: f64, b: f64) -> (f64, [f64; 2], [f64; 3]) {
    let mut f = 0.0;
    let mut g = [0.0; 2];
    let mut h = [0.0; 3];
    for (&s, &y) in scores.iter().zip(labels) {
        let w = cw[usize::from(y)];
        let z = a * s + b;
        let yf = f64::from(y);
        f += w * (softplus(z) - yf * z);
        let p = sigmoid(z);
        let r = w * (p - yf);
        g[0] += r * s;
        g[1] += r;
        let c = w * p * (1.0 - p);
        h[0] += c * s * s;
        h[1] += c * s;
        h[2] += c;
    }
    (f, g, h)
}

/// Fits `(a, b)` by damped Newton on the class-balanced log-likelihood.
/// Slopes that would be nonpositive are pinned at a small positive value
/// and only the intercept is refit.
pub fn fit_platt(scores: &[f64], labels: &[u8]) -> Result<Platt> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: scores.len(),
            got: labels.len(),
        });
    }
    let n_pos = labels.iter().filter(|&&y| y == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::Degenerate("Platt scaling needs both classes".into()));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite("Platt scores"));
    }
    let cw = [0.5 / n_neg as f64, 0.5 / n_pos as f64];
    let (mut a, mut b) = (1.0, 0.0);
    let mut slope_fixed = false;
    for _ in 0..PLATT_MAX_ITERS {
        let (f, g, h) = platt_objective(scores, labels, cw, a, b);
        let grad_norm = if slope_fixed {
            g[1].abs()
        } else {
            g[0].abs().max(g[1].abs())
        };
        if grad_norm < PLATT_GRAD_TOL {
            break;
        }
        let (da, db) = if slope_fixed {
            (0.0, g[1] / h[2].max(1e-300))
        } else {
            let det = h[0] * h[2] - h[1] * h[1];
            if det.abs() < 1e-300 {
                (0.0, g[1] / h[2].max(1e-300))
            } else {
                ((h[2] * g[0] - h[1] * g[1]) / det, (h[0] * g[1] - h[1] * g[0]) / det)
            }
        };
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let (na, nb) = (a - t * da, b - t * db);
            let (nf, _, _) = platt_objective(scores, labels, cw, na, nb);
            if nf <= f {
                a = na;
                b = nb;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
        if !slope_fixed && a <= PLATT_MIN_SLOPE {
            a = PLATT_MIN_SLOPE;
            slope_fixed = true;
        }
    }
    Ok(Platt { a, b })
}

/// Recalibrates `clf` on held-out data; any previous Platt map is replaced.
pub fn platt_recalibrate(clf: &RatioClassifier, held_out: &TrainingView) -> Result<RatioClassifier> {
    let mut scores = Vec::new();
    let mut labels = Vec::new();
    for (points, y) in [(&held_out.reference, 1u8), (&held_out.bias, 0u8)] {
        for x in points {
            scores.push(clf.raw_score(x)?);
            labels.push(y);
        }
    }
    let platt = fit_platt(&scores, &labels)?;
    let mut out = clf.clone();
    out.platt = Some(platt);
    Ok(out)
}

/// Area under the ROC curve via the rank-sum statistic; ties count half.
pub fn roc_auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: scores.len(),
            got: labels.len(),
        });
    }
    let n_pos = labels.iter().filter(|&&y| y == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::Degenerate("ROC-AUC needs both classes".into()));
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&i, &j| scores[i].total_cmp(&scores[j]));
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && scores[idx[j + 1]] == scores[idx[i]] {
            j += 1;
        }
        // average 1-based rank of the tie group
        let avg_rank = (i + j) as f64 / 2.0 + 1.0;
        rank_sum_pos += avg_rank * idx[i..=j].iter().filter(|&&k| labels[k] == 1).count() as f64;
        i = j + 1;
    }
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_half_on_balanced_set() {
        let probs = vec![0.5; 1000];
        let labels: Vec<u8> = (0..1000).map(|i| (i % 2) as u8).collect();
        let r = calibration_report(&probs, &labels, 10).unwrap();
        assert_eq!(r.bins.len(), 1);
        assert!(r.ece < 1e-12);
        assert_eq!(r.bins.iter().map(|b| b.count).sum::<usize>(), 1000);
    }

    #[test]
    fn report_errors() {
        assert!(calibration_report(&[], &[], 10).is_err());
        assert!(calibration_report(&[0.2], &[1, 0], 10).is_err());
        assert!(calibration_report(&[1.2], &[1], 10).is_err());
    }

    #[test]
    fn probability_one_lands_in_last_bin() {
        let r = calibration_report(&[1.0, 0.0], &[1, 0], 10).unwrap();
        assert_eq!(r.bins.len(), 2);
        assert_eq!(r.bins[1].upper, 1.0);
        assert_eq!(r.ece, 0.0);
    }

    #[test]
    fn auc_basics() {
        assert_eq!(roc_auc(&[0.1, 0.2, 0.8, 0.9], &[0, 0, 1, 1]).unwrap(), 1.0);
        assert_eq!(roc_auc(&[0.9, 0.8, 0.2, 0.1], &[0, 0, 1, 1]).unwrap(), 0.0);
        assert_eq!(roc_auc(&[0.5; 4], &[0, 1, 0, 1]).unwrap(), 0.5);
        // brute-force pair count
        let s = [0.3, 0.1, 0.3, 0.7, 0.2, 0.7];
        let y = [1, 0, 0, 1, 1, 0];
        let mut wins = 0.0;
        let mut pairs = 0.0;
        for i in 0..6 {
            for j in 0..6 {
                if y[i] == 1 && y[j] == 0 {
                    pairs += 1.0;
                    wins += if s[i] > s[j] {
                        1.0
                    } else if s[i] == s[j] {
                        0.5
                    } else {
                        0.0
                    };
                }
            }
        }
        assert!((roc_auc(&s, &y).unwrap() - wins / pairs).abs() < 1e-15);
        assert!(roc_auc(&[0.1], &[1]).is_err());
    }

    #[test]
    fn platt_needs_both_classes() {
        assert!(matches!(fit_platt(&[0.1, 0.2], &[1, 1]), Err(Error::Degenerate(_))));
    }

    #[test]
    fn platt_recovers_known_map() {
        // labels drawn deterministically at the calibrated frequencies of σ(2s - 1)
        let mut scores = Vec::new();
        let mut labels = Vec::new();
        for i in 0..400 {
            let s = -3.0 + 6.0 * i as f64 / 399.0;
            let p = sigmoid(2.0 * s - 1.0);
            let n_pos = (p * 1000.0).round() as usize;
            for j in 0..1000 {
                scores.push(s);
                labels.push(u8::from(j < n_pos));
            }
        }
        // class-balanced fit shifts the intercept by log(n_neg / n_pos)
        let n_pos = labels.iter().filter(|&&y| y == 1).count() as f64;
        let n_neg = labels.len() as f64 - n_pos;
        let p = fit_platt(&scores, &labels).unwrap();
        assert!((p.a - 2.0).abs() < 0.01, "{p:?}");
        assert!((p.b - (-1.0 + (n_neg / n_pos).ln())).abs() < 0.01, "{p:?}");
    }

    #[test]
    fn anti_correlated_scores_keep_positive_slope() {
        let scores: Vec<f64> = (0..100).map(|i| i as f64 / 10.0).collect();
        let labels: Vec<u8> = (0..100).map(|i| u8::from(i < 50)).collect();
        let p = fit_platt(&scores, &labels).unwrap();
        assert!(p.a > 0.0);
    }
}
