use fairweight::dre::{importance_weights, train_classifier, ClassifierHyper};
use fairweight::genmodel::{assign_weights, fit_conditional, fit_equi_weight, fit_weighted_gmm, GmmConfig};
use fairweight::synthdata::{build_splits, SubgroupSpec};

#[test]
fn poisoned_subgroup_labels_do_not_change_training() {
    let spec = SubgroupSpec::single_attribute(0.9).unwrap();
    let clean = build_splits(&spec, 800, 0.25, 13).unwrap();
    let mut poisoned = clean.clone();
    for (i, p) in poisoned.d_bias.iter_mut().chain(poisoned.d_ref.iter_mut()).enumerate() {
        p.z_hidden = (p.z_hidden + 1 + i) % 2;
    }
    assert_ne!(clean, poisoned);
    assert_eq!(clean.training_view(), poisoned.training_view());

    let hyper = ClassifierHyper {
        epochs: 4,
        seed: 3,
        ..Default::default()
    };
    let cfg = GmmConfig::default();
    let run = |pair: &fairweight::synthdata::DatasetPair| {
        let view = pair.training_view();
        let clf = train_classifier(&view, &hyper).unwrap();
        let (w, _) = importance_weights(&clf, &view.bias).unwrap();
        let wd = assign_weights(&view, &clf, 1.0).unwrap();
        (
            clf,
            w,
            fit_weighted_gmm(&wd, &cfg).unwrap(),
            fit_equi_weight(&view, &cfg).unwrap(),
            fit_conditional(&view, &cfg).unwrap(),
        )
    };
    assert_eq!(run(&clean), run(&poisoned));
}
