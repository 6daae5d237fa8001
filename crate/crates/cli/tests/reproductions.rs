use fairweight::dre::ClassifierHyper;
use fairweight::synthdata::BiasSetting;
use fairweight_cli::table1::{closed_form_column, table1_row, Table1Config};
use fairweight_cli::toy::{toy_gmm_demo, ToyConfig};

#[test]
fn monte_carlo_tracks_closed_form() {
    let cfg = Table1Config {
        n_per_split: 500,
        n_eval: 500,
        classifier: ClassifierHyper {
            epochs: 3,
            ..Default::default()
        },
        ..Default::default()
    };
    let closed = closed_form_column().unwrap();
    for (setting, cf) in [BiasSetting::Single90, BiasSetting::Single80, BiasSetting::Multi]
        .into_iter()
        .zip(closed)
    {
        let row = table1_row(setting, &cfg).unwrap();
        assert_eq!(row.closed_form, cf);
        assert!(
            (row.monte_carlo - cf).abs() < 0.01,
            "{setting:?}: {} vs {cf}",
            row.monte_carlo
        );
    }
}

#[test]
fn toy_ratios_track_bayes() {
    let report = toy_gmm_demo(&ToyConfig::default()).unwrap();
    assert!(report.median_relative_error < 0.15, "{}", report.median_relative_error);
    // Bayes ratio is 5 on the minority mode and about 0.56 on the majority
    assert!(report.max_estimated > 2.5 && report.min_estimated < 0.8);
}

#[test]
fn toy_no_bias_ratios_are_flat() {
    let report = toy_gmm_demo(&ToyConfig {
        no_bias: true,
        ..Default::default()
    })
    .unwrap();
    let [lo, hi] = report.central_range;
    assert!(lo >= 0.8 && hi <= 1.25, "[{lo}, {hi}]");
    assert!(report.grid.iter().all(|p| (p.bayes - 1.0).abs() < 1e-12));
}

#[test]
fn toy_is_deterministic_per_seed() {
    let cfg = ToyConfig {
        seed: 9,
        ..Default::default()
    };
    let a = toy_gmm_demo(&cfg).unwrap();
    assert_eq!(a, toy_gmm_demo(&cfg).unwrap());
    assert_ne!(a.grid, toy_gmm_demo(&ToyConfig { seed: 10, ..cfg }).unwrap().grid);
}
