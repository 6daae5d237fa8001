use fairweight::evalmetrics::{
    attribute_marginal, downstream_dp_distance, fairness_discrepancy, frechet_distance, weight_histogram_by_subgroup,
    AttributeRule, GaussianMoments, LogisticHyper, MarginalVector, TaskExample, TaskLabeler,
};
use fairweight::genmodel::{assign_weights, WeightedDataset};
use fairweight::oracle::BayesWeights;
use fairweight::rng;
use fairweight::synthdata::{build_splits, sample, SubgroupSpec, Which};
use proptest::prelude::*;
use rand::Rng;

fn marginal(v: Vec<f64>) -> MarginalVector {
    let s: f64 = v.iter().sum();
    MarginalVector::new(v.into_iter().map(|x| x / s).collect()).unwrap()
}

#[test]
fn discrepancy_is_a_metric_on_random_triples() {
    let mut r = rng::stream(0, 77);
    for _ in 0..1000 {
        let k = r.random_range(2..6);
        let mut draw = || marginal((0..k).map(|_| r.random_range(0.0..1.0) + 1e-9).collect());
        let (a, b, c) = (draw(), draw(), draw());
        let ab = fairness_discrepancy(&a, &b).unwrap();
        let ba = fairness_discrepancy(&b, &a).unwrap();
        let bc = fairness_discrepancy(&b, &c).unwrap();
        let ac = fairness_discrepancy(&a, &c).unwrap();
        assert!(ab >= 0.0 && ab <= std::f64::consts::SQRT_2);
        assert_eq!(ab, ba);
        assert!(ac <= ab + bc + 1e-15);
        assert_eq!(fairness_discrepancy(&a, &a).unwrap(), 0.0);
    }
}

#[test]
fn discrepancy_examples() {
    let a = MarginalVector::new(vec![0.5, 0.5]).unwrap();
    let b = MarginalVector::new(vec![0.9, 0.1]).unwrap();
    assert!((fairness_discrepancy(&a, &b).unwrap() - 0.56569).abs() < 1e-5);
    let c = MarginalVector::new(vec![0.5, 0.3, 0.2]).unwrap();
    assert!(fairness_discrepancy(&a, &c).is_err());
}

fn random_moments(r: &mut impl Rng, d: usize) -> GaussianMoments {
    let mean: Vec<f64> = (0..d).map(|_| r.random_range(-3.0..3.0)).collect();
    let a: Vec<f64> = (0..d * d).map(|_| r.random_range(-1.0..1.0)).collect();
    // A Aᵀ + 0.1 I
    let mut cov = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            cov[i * d + j] = (0..d).map(|k| a[i * d + k] * a[j * d + k]).sum::<f64>() + if i == j { 0.1 } else { 0.0 };
        }
    }
    GaussianMoments::new(mean, cov).unwrap()
}

fn rotate(m: &GaussianMoments, q: &[f64], d: usize) -> GaussianMoments {
    let mean = (0..d).map(|i| (0..d).map(|k| q[i * d + k] * m.mean[k]).sum()).collect();
    let mut qs = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            qs[i * d + j] = (0..d).map(|k| q[i * d + k] * m.cov[k * d + j]).sum();
        }
    }
    let mut cov = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            cov[i * d + j] = (0..d).map(|k| qs[i * d + k] * q[j * d + k]).sum();
        }
    }
    // bring the product back to exact symmetry
    for i in 0..d {
        for j in 0..i {
            let s = 0.5 * (cov[i * d + j] + cov[j * d + i]);
            cov[i * d + j] = s;
            cov[j * d + i] = s;
        }
    }
    GaussianMoments::new(mean, cov).unwrap()
}

#[test]
fn frechet_zero_symmetry_and_rotation_invariance() {
    let mut r = rng::stream(1, 78);
    for case in 0..200 {
        let d = 2 + case % 3;
        let a = random_moments(&mut r, d);
        let b = random_moments(&mut r, d);
        assert!(frechet_distance(&a, &a).unwrap().abs() < 1e-8);
        let ab = frechet_distance(&a, &b).unwrap();
        let ba = frechet_distance(&b, &a).unwrap();
        assert!((ab - ba).abs() < 1e-8 * ab.max(1.0), "{ab} vs {ba}");
        // Householder reflection I - 2vvᵀ/|v|² is orthogonal
        let v: Vec<f64> = (0..d).map(|_| r.random_range(-1.0..1.0)).collect();
        let vv: f64 = v.iter().map(|x| x * x).sum();
        let q: Vec<f64> = (0..d * d)
            .map(|ij| {
                let (i, j) = (ij / d, ij % d);
                f64::from(u8::from(i == j)) - 2.0 * v[i] * v[j] / vv
            })
            .collect();
        let rot = frechet_distance(&rotate(&a, &q, d), &rotate(&b, &q, d)).unwrap();
        assert!((rot - ab).abs() < 1e-8 * ab.max(1.0), "{rot} vs {ab}");
    }
}

#[test]
fn frechet_examples() {
    let m = |mu: f64, var: f64| GaussianMoments::new(vec![mu], vec![var]).unwrap();
    assert!((frechet_distance(&m(0.0, 1.0), &m(1.0, 1.0)).unwrap() - 1.0).abs() < 1e-12);
    assert!((frechet_distance(&m(0.0, 1.0), &m(0.0, 4.0)).unwrap() - 1.0).abs() < 1e-12);
    assert!(GaussianMoments::new(vec![0.0, 0.0], vec![1.0, 0.0, 0.0, -0.1]).is_err());
}

#[test]
fn marginal_of_reference_samples_recovers_reference_proportions() {
    for spec in [
        SubgroupSpec::single_attribute(0.9).unwrap(),
        SubgroupSpec::multi_attribute().unwrap(),
    ] {
        let xs: Vec<Vec<f64>> = sample(&spec, Which::Ref, 10_000, 3).into_iter().map(|p| p.x).collect();
        let soft = attribute_marginal(&spec, &xs, AttributeRule::Soft).unwrap();
        let hard = attribute_marginal(&spec, &xs, AttributeRule::Thresholded).unwrap();
        for ((s, h), p) in soft.as_slice().iter().zip(hard.as_slice()).zip(spec.p_ref()) {
            assert!((s - p).abs() < 0.01 && (s - h).abs() < 0.01);
        }
    }
    let spec = SubgroupSpec::single_attribute(0.9).unwrap();
    let one = attribute_marginal(&spec, &[vec![-2.0]], AttributeRule::Soft).unwrap();
    assert!(one.as_slice()[0] > 1.0 - 1e-9);
}

fn bayes_histogram(bias: f64) -> Vec<f64> {
    let spec = SubgroupSpec::single_attribute(bias).unwrap();
    let pair = build_splits(&spec, 5000, 0.5, 4).unwrap();
    let wd = assign_weights(&pair.training_view(), &BayesWeights { spec: &spec }, 1.0).unwrap();
    let h = weight_histogram_by_subgroup(&wd, &pair.pooled_subgroups(), 20).unwrap();
    h.iter().map(|s| s.mean).collect()
}

#[test]
fn weight_histograms_follow_subgroup_ratios() {
    let strong = bayes_histogram(0.9);
    assert!(
        (strong[0] - 0.5 / 0.9).abs() < 1e-3 && (strong[1] - 5.0).abs() < 5e-3,
        "{strong:?}"
    );
    let mild = bayes_histogram(0.8);
    assert!(
        (mild[0] - 0.625).abs() < 1e-3 && (mild[1] - 2.5).abs() < 5e-3,
        "{mild:?}"
    );
    for k in 0..2 {
        assert!((mild[k] - 1.0).abs() < (strong[k] - 1.0).abs());
    }

    let spec = SubgroupSpec::single_attribute(0.9).unwrap();
    let pair = build_splits(&spec, 300, 0.5, 5).unwrap();
    let view = pair.training_view();
    let wd = WeightedDataset::equi_weight(&view);
    for s in weight_histogram_by_subgroup(&wd, &pair.pooled_subgroups(), 5).unwrap() {
        assert_eq!(s.mean, 1.0);
        assert!(!s.downweighted && !s.upweighted);
    }
}

fn labeled(spec: &SubgroupSpec, which: Which, n: usize, seed: u64) -> Vec<TaskExample> {
    let pts = sample(spec, which, n, seed);
    let xs: Vec<Vec<f64>> = pts.iter().map(|p| p.x.clone()).collect();
    let us: Vec<usize> = pts.iter().map(|p| p.z_hidden).collect();
    TaskLabeler::default().label(&xs, &us, seed ^ 0xabc).unwrap()
}

#[test]
fn balanced_augmentation_reduces_parity_distance() {
    let biased = SubgroupSpec::single_attribute_2d(0.9).unwrap();
    let hyper = LogisticHyper::default();
    let mut wins = 0;
    for seed in 0..10 {
        let base = 100 * seed;
        let train = labeled(&biased, Which::Bias, 2000, base);
        let reference = labeled(&biased, Which::Ref, 2000, base + 1);
        let test = labeled(&biased, Which::Ref, 5000, base + 2);
        let mut augmented = train.clone();
        augmented.extend(labeled(&biased, Which::Ref, 2000, base + 3));
        let plain = downstream_dp_distance(&train, &reference, &test, &hyper).unwrap();
        let aug = downstream_dp_distance(&augmented, &reference, &test, &hyper).unwrap();
        if plain.delta_dp > aug.delta_dp {
            wins += 1;
        }
    }
    assert!(wins >= 8, "{wins}/10");
}

proptest! {
    #[test]
    fn discrepancy_bounded(a in prop::collection::vec(0.0f64..1.0, 3), b in prop::collection::vec(0.0f64..1.0, 3)) {
        prop_assume!(a.iter().sum::<f64>() > 1e-6 && b.iter().sum::<f64>() > 1e-6);
        let f = fairness_discrepancy(&marginal(a), &marginal(b)).unwrap();
        prop_assert!((0.0..=std::f64::consts::SQRT_2 + 1e-12).contains(&f));
    }
}
