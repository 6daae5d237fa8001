use fairweight::dre::{
    balanced_loss, calibration_curve, calibration_report, empirical_nce, holdout_split, importance_weights,
    platt_recalibrate, roc_auc, train_classifier, weight_from_probability, ClassifierHyper, Platt, RatioClassifier,
};
use fairweight::nnet::{init, sigmoid, Activation, MlpParams};
use fairweight::oracle::{bayes_ce_monte_carlo, bayes_probability, BiasConfig};
use fairweight::synthdata::{build_splits, DatasetPair, SubgroupSpec};
use proptest::prelude::*;

fn hyper(seed: u64) -> ClassifierHyper {
    ClassifierHyper {
        seed,
        ..Default::default()
    }
}

/// Network `β + α tanh(κ x)` on the 1-D spec: saturates at the two
/// balanced Bayes logits `ln(p_ref/p_bias)` of the subgroups.
fn two_level_net(spec: &SubgroupSpec, scale: f64) -> MlpParams {
    let lo = (spec.p_ref()[0] / spec.p_bias()[0]).ln();
    let hi = (spec.p_ref()[1] / spec.p_bias()[1]).ln();
    let mut net = init(&[1, 1, 1], Activation::Tanh, 0).unwrap();
    net.set_from_slice(&[8.0, 0.0, scale * (hi - lo) / 2.0, scale * (hi + lo) / 2.0])
        .unwrap();
    net
}

#[test]
fn no_bias_validation_loss_is_log_two() {
    let spec = SubgroupSpec::single_attribute(0.5).unwrap();
    let pair = build_splits(&spec, 5000, 1.0, 1).unwrap();
    let clf = train_classifier(&pair.training_view(), &hyper(1)).unwrap();
    assert!((clf.train_report.best_val_loss - std::f64::consts::LN_2).abs() < 0.02);
}

#[test]
fn biased_validation_loss_near_bayes() {
    let spec = SubgroupSpec::single_attribute(0.9).unwrap();
    let pair = build_splits(&spec, 1000, 1.0, 2).unwrap();
    let clf = train_classifier(&pair.training_view(), &hyper(2)).unwrap();
    let bayes = BiasConfig::from_spec(&spec, 1.0).unwrap().bayes_ce().unwrap();
    let v = clf.train_report.best_val_loss;
    assert!((v - bayes).abs() < 0.05, "{v} vs {bayes}");
}

#[test]
fn predictions_and_weights() {
    let net = init(&[1, 4, 1], Activation::Tanh, 0).unwrap();
    let mut zero = net.clone();
    zero.set_from_slice(&vec![0.0; net.param_count()]).unwrap();
    assert_eq!(
        RatioClassifier::new(zero, 1.0).unwrap().predict_prob(&[3.0]).unwrap(),
        0.5
    );

    let mut clf = RatioClassifier::new(net, 1.0).unwrap();
    let raw: Vec<f64> = [-1.0, 0.2, 2.0]
        .iter()
        .map(|x| clf.predict_prob(&[*x]).unwrap())
        .collect();
    clf.platt = Some(Platt { a: 1.0, b: 0.0 });
    for (x, p) in [-1.0, 0.2, 2.0].iter().zip(&raw) {
        assert_eq!(clf.predict_prob(&[*x]).unwrap(), *p);
    }
    assert_eq!(weight_from_probability(0.5, 1.0).value, 1.0);
    assert!((weight_from_probability(0.9, 2.0).value - 18.0).abs() < 1e-12);
}

#[test]
fn oracle_cross_entropy_matches_closed_form() {
    let spec = SubgroupSpec::single_attribute(0.9).unwrap();
    let mc = bayes_ce_monte_carlo(&spec, 1.0, 100_000, 3).unwrap();
    assert!((mc - 0.591).abs() < 0.01, "{mc}");
}

#[test]
fn learned_classifier_respects_bayes_bound() {
    let spec = SubgroupSpec::single_attribute(0.9).unwrap();
    let pair = build_splits(&spec, 2000, 1.0, 4).unwrap();
    let clf = train_classifier(&pair.training_view(), &hyper(4)).unwrap();
    let eval = build_splits(&spec, 100_000, 1.0, 5).unwrap().training_view();
    let ce = empirical_nce(&clf, &eval).unwrap();
    let bayes = BiasConfig::from_spec(&spec, 1.0).unwrap().bayes_ce().unwrap();
    assert!(ce >= bayes - 0.01, "{ce} < {bayes}");
}

fn oracle_probs(pair: &DatasetPair, flip: bool) -> (Vec<f64>, Vec<u8>) {
    let mut probs = Vec::new();
    let mut labels = Vec::new();
    for p in pair.d_ref.iter().chain(&pair.d_bias) {
        let c = bayes_probability(&pair.spec, pair.gamma, &p.x).unwrap();
        probs.push(if flip { 1.0 - c } else { c });
        labels.push(p.y);
    }
    (probs, labels)
}

#[test]
fn oracle_is_calibrated_and_its_mirror_is_not() {
    let spec = SubgroupSpec::single_attribute(0.9).unwrap();
    let pair = build_splits(&spec, 50_000, 1.0, 6).unwrap();
    let (p, y) = oracle_probs(&pair, false);
    let rep = calibration_report(&p, &y, 10).unwrap();
    assert!(rep.ece < 0.01, "{}", rep.ece);
    assert_eq!(rep.bins.iter().map(|b| b.count).sum::<usize>(), rep.total);
    // γ = 2 keeps the mirrored probabilities away from the 0.4 boundary
    let pair = build_splits(&spec, 20_000, 0.5, 7).unwrap();
    let (p, y) = oracle_probs(&pair, true);
    let rep = calibration_report(&p, &y, 10).unwrap();
    assert!(rep.ece > 0.4, "{}", rep.ece);
}

#[test]
fn platt_on_calibrated_and_doubled_logits() {
    let spec = SubgroupSpec::single_attribute(0.9).unwrap();
    let held = build_splits(&spec, 10_000, 1.0, 8).unwrap().training_view();
    let calibrated = RatioClassifier::new(two_level_net(&spec, 1.0), 1.0).unwrap();
    let p = platt_recalibrate(&calibrated, &held).unwrap().platt.unwrap();
    assert!((p.a - 1.0).abs() < 0.05 && p.b.abs() < 0.05, "{p:?}");
    let doubled = RatioClassifier::new(two_level_net(&spec, 2.0), 1.0).unwrap();
    let p = platt_recalibrate(&doubled, &held).unwrap().platt.unwrap();
    assert!((p.a - 0.5).abs() < 0.05, "{p:?}");
    let curve = calibration_curve(&calibrated, &held, 10).unwrap();
    assert!(curve.ece < 0.02);
}

#[test]
fn platt_preserves_auc() {
    let spec = SubgroupSpec::single_attribute_2d(0.9).unwrap();
    let pair = build_splits(&spec, 2000, 0.5, 9).unwrap();
    let (train, held) = holdout_split(&pair.training_view(), 0.5, 9).unwrap();
    let clf = train_classifier(&train, &ClassifierHyper { epochs: 5, ..hyper(9) }).unwrap();
    let re = platt_recalibrate(&clf, &held).unwrap();
    let mut before = Vec::new();
    let mut after = Vec::new();
    let mut labels = Vec::new();
    for (pts, y) in [(&held.reference, 1u8), (&held.bias, 0u8)] {
        for x in pts {
            before.push(clf.predict_prob(x).unwrap());
            after.push(re.predict_prob(x).unwrap());
            labels.push(y);
        }
    }
    let a0 = roc_auc(&before, &labels).unwrap();
    let a1 = roc_auc(&after, &labels).unwrap();
    assert!((a0 - a1).abs() <= 1e-12, "{a0} vs {a1}");
}

fn mean_weight_by_subgroup(spec: &SubgroupSpec, n_bias: usize, perc: f64, seed: u64) -> Vec<f64> {
    let pair = build_splits(spec, n_bias, perc, seed).unwrap();
    let clf = train_classifier(&pair.training_view(), &hyper(seed)).unwrap();
    let xs: Vec<Vec<f64>> = pair.d_bias.iter().map(|p| p.x.clone()).collect();
    let (w, _) = importance_weights(&clf, &xs).unwrap();
    let mut sums = vec![0.0; spec.n_subgroups()];
    let mut counts = vec![0usize; spec.n_subgroups()];
    for (p, w) in pair.d_bias.iter().zip(&w) {
        sums[p.z_hidden] += w;
        counts[p.z_hidden] += 1;
    }
    sums.iter().zip(&counts).map(|(s, &c)| s / c as f64).collect()
}

#[test]
fn underrepresented_subgroups_are_upweighted() {
    let spec = SubgroupSpec::single_attribute(0.9).unwrap();
    let m = mean_weight_by_subgroup(&spec, 5000, 0.5, 10);
    assert!(m[0] < 1.0 && m[1] > 1.0, "{m:?}");
}

#[test]
fn weight_ordering_follows_subgroup_ratios() {
    let settings = [
        (SubgroupSpec::single_attribute(0.9).unwrap(), 3000),
        (SubgroupSpec::single_attribute(0.8).unwrap(), 3000),
        (SubgroupSpec::multi_attribute().unwrap(), 10_000),
    ];
    for (i, (spec, n)) in settings.iter().enumerate() {
        let m = mean_weight_by_subgroup(spec, *n, 1.0, 20 + i as u64);
        let inv_b: Vec<f64> = (0..spec.n_subgroups()).map(|k| 1.0 / spec.b(k).unwrap()).collect();
        for a in 0..m.len() {
            for b in 0..m.len() {
                if inv_b[a] < inv_b[b] {
                    assert!(m[a] < m[b], "setting {i}: {m:?} vs {inv_b:?}");
                }
            }
        }
    }
}

#[test]
fn balanced_loss_of_zero_net_is_log_two() {
    let spec = SubgroupSpec::single_attribute(0.9).unwrap();
    let view = build_splits(&spec, 100, 0.3, 0).unwrap().training_view();
    let mut net = init(&[1, 3, 1], Activation::Tanh, 0).unwrap();
    net.set_from_slice(&vec![0.0; net.param_count()]).unwrap();
    assert!((balanced_loss(&net, &view).unwrap() - std::f64::consts::LN_2).abs() < 1e-15);
}

proptest! {
    #[test]
    fn platt_never_reorders(scores in prop::collection::vec(-20.0f64..20.0, 2..50), a in 1e-3f64..10.0, b in -5.0f64..5.0) {
        let p = Platt { a, b };
        for i in 0..scores.len() {
            for j in 0..scores.len() {
                if scores[i] < scores[j] {
                    prop_assert!(sigmoid(p.apply(scores[i])) <= sigmoid(p.apply(scores[j])));
                    prop_assert!(p.apply(scores[i]) < p.apply(scores[j]));
                }
            }
        }
    }
}
