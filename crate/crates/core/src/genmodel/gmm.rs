use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{GenerativeModel, WeightedDataset};
use crate::error::{invalid, Error, Result};
use crate::gaussian::{floor_eigenvalues, log_sum_exp, Gaussian};
use crate::rng::{self, child_seed, streams};

/// Smallest covariance eigenvalue the M-step may produce.
pub const COV_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CovarianceMode {
    Full,
    /// One covariance shared by every component being fit together.
    Tied,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GmmConfig {
    pub k: usize,
    pub init_seed: u64,
    pub max_iters: usize,
    /// Stop once the relative log-likelihood gain drops below this.
    pub tol: f64,
    pub covariance: CovarianceMode,
}

impl Default for GmmConfig {
    fn default() -> Self {
        Self {
            k: 2,
            init_seed: 0,
            max_iters: 300,
            tol: 1e-10,
            covariance: CovarianceMode::Full,
        }
    }
}

impl GmmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(invalid("k", "need at least one component"));
        }
        if !(self.tol.is_finite() && self.tol >= 0.0) {
            return Err(invalid("tol", "must be finite and nonnegative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub iteration: usize,
    pub weighted_log_likelihood: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GmmDoc")]
pub struct GmmModel {
    pub weights: Vec<f64>,
    pub components: Vec<Gaussian>,
    /// Objective after initialization (iteration 0) and after each EM step.
    pub fit_log: Vec<FitRecord>,
    /// Covariance matrices raised to the eigenvalue floor, summed over steps.
    pub floor_events: usize,
    pub converged: bool,
}

#[derive(Deserialize)]
struct GmmDoc {
    weights: Vec<f64>,
    components: Vec<Gaussian>,
    #[serde(default)]
    fit_log: Vec<FitRecord>,
    #[serde(default)]
    floor_events: usize,
    #[serde(default)]
    converged: bool,
}

impl TryFrom<GmmDoc> for GmmModel {
    type Error = Error;
    fn try_from(doc: GmmDoc) -> Result<Self> {
        let mut m = GmmModel::new(doc.weights, doc.components)?;
        m.fit_log = doc.fit_log;
        m.floor_events = doc.floor_events;
        m.converged = doc.converged;
        Ok(m)
    }
}

impl GmmModel {
    pub fn new(weights: Vec<f64>, components: Vec<Gaussian>) -> Result<Self> {
        if weights.is_empty() || weights.len() != components.len() {
            return Err(Error::DimensionMismatch {
                expected: components.len(),
                got: weights.len(),
            });
        }
        let total: f64 = weights.iter().sum();
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) || (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidProbabilities {
                name: "weights",
                reason: "mixture weights must be nonnegative and sum to 1".into(),
            });
        }
        let d = components[0].dim();
        if let Some(c) = components.iter().find(|c| c.dim() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: c.dim(),
            });
        }
        Ok(Self {
            weights,
            components,
            fit_log: Vec::new(),
            floor_events: 0,
            converged: false,
        })
    }

    pub fn k(&self) -> usize {
        self.weights.len()
    }

    pub fn means(&self) -> Vec<Vec<f64>> {
        self.components.iter().map(|c| c.mean().to_vec()).collect()
    }

    /// `log π_k + log N(x; μ_k, Σ_k)` for every component.
    pub fn component_log_joint(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(
            self.weights
                .iter()
                .zip(&self.components)
                .map(|(w, c)| w.ln() + c.log_pdf(x)),
        );
    }

    pub fn log_density(&self, x: &[f64]) -> f64 {
        let mut buf = Vec::with_capacity(self.k());
        self.component_log_joint(x, &mut buf);
        log_sum_exp(&buf)
    }

    pub fn responsibilities(&self, x: &[f64]) -> Vec<f64> {
        let mut buf = Vec::with_capacity(self.k());
        self.component_log_joint(x, &mut buf);
        let lse = log_sum_exp(&buf);
        buf.iter().map(|l| (l - lse).exp()).collect()
    }

    /// `Σ w_i log p(x_i)`.
    pub fn weighted_log_likelihood(&self, points: &[Vec<f64>], weights: &[f64]) -> f64 {
        points
            .iter()
            .zip(weights)
            .filter(|(_, &w)| w != 0.0)
            .map(|(x, w)| w * self.log_density(x))
            .sum()
    }

    /// Weighted k-means++ seeding with the pooled weighted covariance on
    /// every component and uniform mixture weights.
    pub fn initialize(points: &[Vec<f64>], weights: &[f64], cfg: &GmmConfig) -> Result<Self> {
        cfg.validate()?;
        let d = check_data(points, weights)?;
        let mut r = rng::stream(cfg.init_seed, streams::GMM_INIT);
        let centers = kmeans_pp(points, weights, cfg.k, &mut r)?;
        let (cov, floored) = global_covariance(&[Group { points, weights }], d)?;
        let components = centers
            .into_iter()
            .map(|m| Gaussian::new(m, cov.clone()))
            .collect::<Result<Vec<_>>>()?;
        let mut model = Self::new(vec![1.0 / cfg.k as f64; cfg.k], components)?;
        model.floor_events = usize::from(floored);
        Ok(model)
    }

    /// One E step followed by one M step.
    pub fn em_step(&self, points: &[Vec<f64>], weights: &[f64], mode: CovarianceMode) -> Result<Self> {
        let d = check_data(points, weights)?;
        if d != self.components[0].dim() {
            return Err(Error::DimensionMismatch {
                expected: self.components[0].dim(),
                got: d,
            });
        }
        let groups = [Group { points, weights }];
        let mut resp = vec![Vec::new()];
        e_step(self, &groups[0], &mut resp[0]);
        let (mut next, floored) = m_step(&groups, &resp, self.k(), d, mode)?;
        let mut model = next.pop().expect("one group");
        model.floor_events = floored;
        Ok(model)
    }

    /// Runs EM from `init` until the relative gain drops below `tol`.
    pub fn fit_from(init: Self, points: &[Vec<f64>], weights: &[f64], cfg: &GmmConfig) -> Result<Self> {
        cfg.validate()?;
        check_data(points, weights)?;
        let mut out = run_em(vec![init], &[Group { points, weights }], cfg)?;
        Ok(out.pop().expect("one group"))
    }

    pub fn fit(points: &[Vec<f64>], weights: &[f64], cfg: &GmmConfig) -> Result<Self> {
        let init = Self::initialize(points, weights, cfg)?;
        Self::fit_from(init, points, weights, cfg)
    }

    pub fn final_log_likelihood(&self) -> Option<f64> {
        self.fit_log.last().map(|r| r.weighted_log_likelihood)
    }
}

impl GenerativeModel for GmmModel {
    fn dim(&self) -> usize {
        self.components[0].dim()
    }

    fn sample(&self, n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
        let mut r = rng::stream(seed, streams::MODEL_SAMPLE);
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            let k = draw_index(&self.weights, 1.0, &mut r);
            out.push(self.components[k].sample(&mut r));
        }
        Ok(out)
    }
}

/// Weighted EM on a pooled weighted dataset.
pub fn fit_weighted_gmm(data: &WeightedDataset, cfg: &GmmConfig) -> Result<GmmModel> {
    GmmModel::fit(&data.points, &data.weights, cfg)
}

/// Fits one mixture per group by joint EM. In `Tied` mode a single
/// covariance is shared by every component of every group; each returned
/// model's `fit_log` records the joint objective.
pub fn fit_shared_covariance(groups: &[(&[Vec<f64>], &[f64])], cfg: &GmmConfig) -> Result<Vec<GmmModel>> {
    cfg.validate()?;
    if groups.is_empty() {
        return Err(Error::EmptyData("groups"));
    }
    let gs: Vec<Group> = groups
        .iter()
        .map(|&(points, weights)| Group { points, weights })
        .collect();
    let mut d = None;
    for g in &gs {
        let dg = check_data(g.points, g.weights)?;
        if let Some(d0) = d {
            if d0 != dg {
                return Err(Error::DimensionMismatch { expected: d0, got: dg });
            }
        }
        d = Some(dg);
    }
    let d = d.expect("nonempty");
    let shared = match cfg.covariance {
        CovarianceMode::Tied => Some(global_covariance(&gs, d)?),
        CovarianceMode::Full => None,
    };
    let mut inits = Vec::with_capacity(gs.len());
    for (i, g) in gs.iter().enumerate() {
        let sub = GmmConfig {
            init_seed: child_seed(cfg.init_seed, i as u64),
            ..cfg.clone()
        };
        let mut m = GmmModel::initialize(g.points, g.weights, &sub)?;
        if let Some((cov, floored)) = &shared {
            m.components = m
                .components
                .iter()
                .map(|c| Gaussian::new(c.mean().to_vec(), cov.clone()))
                .collect::<Result<Vec<_>>>()?;
            m.floor_events = usize::from(*floored);
        }
        inits.push(m);
    }
    run_em(inits, &gs, cfg)
}

struct Group<'a> {
    points: &'a [Vec<f64>],
    weights: &'a [f64],
}

fn check_data(points: &[Vec<f64>], weights: &[f64]) -> Result<usize> {
    if points.is_empty() {
        return Err(Error::EmptyData("points"));
    }
    if points.len() != weights.len() {
        return Err(Error::DimensionMismatch {
            expected: points.len(),
            got: weights.len(),
        });
    }
    let d = points[0].len();
    if d == 0 {
        return Err(invalid("points", "zero-dimensional points"));
    }
    for p in points {
        if p.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: p.len(),
            });
        }
        if p.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("data point"));
        }
    }
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::NonFinite("importance weight"));
    }
    if weights.iter().sum::<f64>() <= 0.0 {
        return Err(Error::EmptyData("total weight is zero"));
    }
    Ok(d)
}

/// Index drawn with probability proportional to `scores`; `total` is their sum.
fn draw_index(scores: &[f64], total: f64, r: &mut rng::Rng) -> usize {
    let u = r.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > 0.0 {
            acc += s;
            last = i;
            if u < acc {
                return i;
            }
        }
    }
    last
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn kmeans_pp(points: &[Vec<f64>], weights: &[f64], k: usize, r: &mut rng::Rng) -> Result<Vec<Vec<f64>>> {
    let total: f64 = weights.iter().sum();
    let first = draw_index(weights, total, r);
    let mut centers = vec![points[first].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centers[0])).collect();
    while centers.len() < k {
        let scores: Vec<f64> = weights.iter().zip(&d2).map(|(w, d)| w * d).collect();
        let s: f64 = scores.iter().sum();
        let idx = if s > 0.0 {
            draw_index(&scores, s, r)
        } else {
            // every weighted point already sits on a center
            draw_index(weights, total, r)
        };
        let c = points[idx].clone();
        for (dd, p) in d2.iter_mut().zip(points) {
            *dd = dd.min(sq_dist(p, &c));
        }
        centers.push(c);
    }
    Ok(centers)
}

fn accumulate_scatter(s: &mut [f64], x: &[f64], mean: &[f64], w: f64) {
    let d = x.len();
    for i in 0..d {
        let di = x[i] - mean[i];
        let wd = w * di;
        for j in i..d {
            s[i * d + j] += wd * (x[j] - mean[j]);
        }
    }
}

fn mirror_upper(s: &mut [f64], d: usize) {
    for i in 0..d {
        for j in 0..i {
            s[i * d + j] = s[j * d + i];
        }
    }
}

/// Weighted covariance of all groups about their common weighted mean.
fn global_covariance(groups: &[Group], d: usize) -> Result<(Vec<f64>, bool)> {
    let mut total = 0.0;
    let mut mean = vec![0.0; d];
    for g in groups {
        for (x, &w) in g.points.iter().zip(g.weights) {
            total += w;
            for (m, xi) in mean.iter_mut().zip(x) {
                *m += w * xi;
            }
        }
    }
    mean.iter_mut().for_each(|m| *m /= total);
    let mut s = vec![0.0; d * d];
    for g in groups {
        for (x, &w) in g.points.iter().zip(g.weights) {
            accumulate_scatter(&mut s, x, &mean, w);
        }
    }
    mirror_upper(&mut s, d);
    s.iter_mut().for_each(|v| *v /= total);
    Ok(floor_eigenvalues(&s, d, COV_FLOOR))
}

/// Fills row-major `n × k` responsibilities; returns `Σ w_i log p(x_i)`.
fn e_step(model: &GmmModel, g: &Group, resp: &mut Vec<f64>) -> f64 {
    let k = model.k();
    resp.clear();
    resp.resize(g.points.len() * k, 0.0);
    let mut buf = Vec::with_capacity(k);
    let mut ll = 0.0;
    for (i, (x, &w)) in g.points.iter().zip(g.weights).enumerate() {
        model.component_log_joint(x, &mut buf);
        let lse = log_sum_exp(&buf);
        for (r, l) in resp[i * k..(i + 1) * k].iter_mut().zip(&buf) {
            *r = (l - lse).exp();
        }
        if w != 0.0 {
            ll += w * lse;
        }
    }
    ll
}

/// Weighted maximum-likelihood update under the eigenvalue floor.
/// Returns one model per group and the number of floored covariances.
fn m_step(
    groups: &[Group],
    resps: &[Vec<f64>],
    k: usize,
    d: usize,
    mode: CovarianceMode,
) -> Result<(Vec<GmmModel>, usize)> {
    let mut per_group = Vec::with_capacity(groups.len());
    let mut tied_scatter = vec![0.0; d * d];
    let mut tied_total = 0.0;
    for (g, resp) in groups.iter().zip(resps) {
        let mut nk = vec![0.0; k];
        let mut sums = vec![0.0; k * d];
        for (i, (x, &w)) in g.points.iter().zip(g.weights).enumerate() {
            for c in 0..k {
                let wr = w * resp[i * k + c];
                nk[c] += wr;
                for (s, xi) in sums[c * d..(c + 1) * d].iter_mut().zip(x) {
                    *s += wr * xi;
                }
            }
        }
        for (c, &n) in nk.iter().enumerate() {
            if !(n > 0.0 && n.is_finite()) {
                return Err(Error::ComponentCollapsed(c));
            }
        }
        let means: Vec<Vec<f64>> = (0..k)
            .map(|c| sums[c * d..(c + 1) * d].iter().map(|s| s / nk[c]).collect())
            .collect();
        let mut scatters = vec![vec![0.0; d * d]; k];
        for (i, (x, &w)) in g.points.iter().zip(g.weights).enumerate() {
            for c in 0..k {
                let wr = w * resp[i * k + c];
                if wr != 0.0 {
                    accumulate_scatter(&mut scatters[c], x, &means[c], wr);
                }
            }
        }
        scatters.iter_mut().for_each(|s| mirror_upper(s, d));
        let total: f64 = nk.iter().sum();
        if mode == CovarianceMode::Tied {
            for s in &scatters {
                for (t, v) in tied_scatter.iter_mut().zip(s) {
                    *t += v;
                }
            }
            tied_total += total;
        }
        let pis: Vec<f64> = nk.iter().map(|n| n / total).collect();
        per_group.push((pis, means, scatters, nk));
    }

    let mut floored = 0;
    let tied_cov = if mode == CovarianceMode::Tied {
        let cov: Vec<f64> = tied_scatter.iter().map(|v| v / tied_total).collect();
        let (cov, f) = floor_eigenvalues(&cov, d, COV_FLOOR);
        floored += usize::from(f);
        Some(cov)
    } else {
        None
    };

    let mut models = Vec::with_capacity(groups.len());
    for (pis, means, scatters, nk) in per_group {
        let mut comps = Vec::with_capacity(k);
        for (c, mean) in means.into_iter().enumerate() {
            let cov = match &tied_cov {
                Some(cov) => cov.clone(),
                None => {
                    let raw: Vec<f64> = scatters[c].iter().map(|v| v / nk[c]).collect();
                    let (cov, f) = floor_eigenvalues(&raw, d, COV_FLOOR);
                    floored += usize::from(f);
                    cov
                }
            };
            comps.push(Gaussian::new(mean, cov)?);
        }
        models.push(GmmModel::new(pis, comps)?);
    }
    Ok((models, floored))
}

fn run_em(mut models: Vec<GmmModel>, groups: &[Group], cfg: &GmmConfig) -> Result<Vec<GmmModel>> {
    let k = models[0].k();
    let d = models[0].components[0].dim();
    let mut floor_events: usize = models.iter().map(|m| m.floor_events).sum();
    let mut resps = vec![Vec::new(); groups.len()];
    let mut ll: f64 = models
        .iter()
        .zip(groups)
        .zip(&mut resps)
        .map(|((m, g), r)| e_step(m, g, r))
        .sum();
    if !ll.is_finite() {
        return Err(Error::NonFinite("initial log-likelihood"));
    }
    let mut log = vec![FitRecord {
        iteration: 0,
        weighted_log_likelihood: ll,
    }];
    let mut converged = false;
    for it in 1..=cfg.max_iters {
        let (next, floored) = m_step(groups, &resps, k, d, cfg.covariance)?;
        floor_events += floored;
        models = next;
        let next_ll: f64 = models
            .iter()
            .zip(groups)
            .zip(&mut resps)
            .map(|((m, g), r)| e_step(m, g, r))
            .sum();
        if !next_ll.is_finite() {
            return Err(Error::NonFinite("log-likelihood"));
        }
        log.push(FitRecord {
            iteration: it,
            weighted_log_likelihood: next_ll,
        });
        let gain = next_ll - ll;
        ll = next_ll;
        if gain <= cfg.tol * ll.abs() {
            converged = true;
            break;
        }
    }
    for m in &mut models {
        m.fit_log.clone_from(&log);
        m.floor_events = floor_events;
        m.converged = converged;
    }
    Ok(models)
}
