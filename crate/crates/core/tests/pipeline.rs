use std::path::PathBuf;

use cace_core::simulation::stream_rng;
use cace_core::*;

fn write_csv(name: &str, contents: &str) -> PathBuf {
    let path = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join(name);
    std::fs::write(&path, contents).unwrap();
    path
}

const DATA: &str = "id,z,w,y,age,group\n\
1,1,1,3.2,31,a\n2,1,1,2.9,45,b\n3,1,0,1.1,28,a\n4,1,1,3.8,52,b\n5,1,0,0.7,39,a\n6,1,1,2.5,33,b\n\
7,0,0,1.0,41,a\n8,0,0,1.6,36,b\n9,0,1,2.7,29,a\n10,0,0,0.4,47,b\n11,0,0,1.3,55,a\n12,0,0,0.9,38,b\n";

#[test]
fn csv_to_all_intervals() {
    let path = write_csv("pipeline.csv", DATA);
    let d =
        ExperimentData::load_csv(&path, &CovariateSelection::Named(vec!["age".into()])).unwrap();
    assert_eq!((d.n(), d.n1(), d.n0(), d.k()), (12, 6, 6, 1));
    assert!((d.covariate_means()[0] - 39.5).abs() < 1e-12);

    let wald = wald_estimate(&d);
    assert!((wald.tau_w_hat - (4.0 / 6.0 - 1.0 / 6.0)).abs() < 1e-15);
    for m in IntervalMethod::ALL {
        let r = interval(&d, 0.05, m).unwrap();
        assert_eq!(r.method, m);
        if !r.abnormal {
            assert!(r.set.covers(r.point.tau_hat.unwrap()));
        }
    }
}

#[test]
fn auto_selection_skips_text_and_keeps_id() {
    let path = write_csv("pipeline_auto.csv", DATA);
    let d = ExperimentData::load_csv(&path, &CovariateSelection::All).unwrap();
    assert_eq!(d.covariate_names(), ["id", "age"]);
    let none = ExperimentData::load_csv(&path, &CovariateSelection::None).unwrap();
    assert_eq!(none.k(), 0);
    assert!(matches!(reg_estimate(&none), Err(CaceError::NoCovariates)));
}

#[test]
fn unknown_covariate_is_rejected() {
    let path = write_csv("pipeline_unknown.csv", DATA);
    let err = ExperimentData::load_csv(&path, &CovariateSelection::Named(vec!["height".into()]));
    assert!(err.is_err());
}

#[test]
fn simulated_dataset_round_trips_through_estimators() {
    let cfg = SimConfig {
        n: 100,
        p_co: 0.85,
        seed: 8,
        ..SimConfig::default()
    };
    let pop = generate_population(&cfg, &mut stream_rng(cfg.seed, 0)).unwrap();
    let z = complete_randomization(cfg.n, cfg.n1(), &mut stream_rng(cfg.seed, 1));
    let d = observe(&pop, &z).unwrap();
    let reports = reg_intervals(&d, 0.05, &[HcFlavor::Ehw, HcFlavor::Hc2, HcFlavor::Hc3]).unwrap();
    let lengths: Vec<f64> = reports.iter().map(|r| r.set.length()).collect();
    assert!(lengths[0] <= lengths[1] && lengths[1] <= lengths[2]);

    let a = run_study_with(&SimConfig { reps: 40, ..cfg }, Some(1)).unwrap();
    let b = run_study_with(&SimConfig { reps: 40, ..cfg }, Some(3)).unwrap();
    assert_eq!(a.summary, b.summary);
    assert_eq!(a.replicates, b.replicates);
    assert_eq!(a.population, pop);
}
