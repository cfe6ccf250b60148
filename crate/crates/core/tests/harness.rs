use eigensense::detectors::{threshold_for_pfa, DetectorKind};
use eigensense::evaluation::{large_k_baseline_threshold, theoretical_pd, TracyWidomInput};
use eigensense::harness::{
    run_cdf_experiment, run_detection_experiment, run_experiment, run_sweep, run_threshold_experiment, to_csv,
    Calibration, Experiment, ExperimentSpec, Records,
};
use eigensense::ValueCase;

const TW1: &str = "gamma:46.446:0.186054:9.84801";

fn spec(experiment: Experiment) -> ExperimentSpec {
    let mut s = ExperimentSpec::new(experiment);
    s.tw_source = Some(TW1.into());
    s.n_runs = 500;
    s
}

#[test]
fn cdf_single_run_is_one_row() {
    let mut s = spec(Experiment::Cdf);
    s.n_runs = 1;
    let r = run_cdf_experiment(&s).unwrap();
    let Records::Cdf(rows) = &r.records else { panic!() };
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].empirical_cdf, 1.0);
    assert!(!r.metadata.stats.contains_key("ks_fixedk"));
}

#[test]
fn k1_med_cdf_is_gaussian() {
    let mut s = spec(Experiment::Cdf);
    s.k = 1;
    s.detector = DetectorKind::Med;
    s.n_runs = 10_000;
    let r = run_cdf_experiment(&s).unwrap();
    assert!(r.metadata.stats["ks_fixedk"] <= 0.02, "{:?}", r.metadata.stats);
}

#[test]
fn threshold_rows_recomputable_from_library() {
    let s = spec(Experiment::Threshold);
    let r = run_threshold_experiment(&s).unwrap();
    let Records::Threshold(rows) = &r.records else { panic!() };
    assert_eq!(rows.len(), s.pfa_grid.len());
    let tw = TracyWidomInput::parse(TW1).unwrap();
    for row in rows {
        assert_eq!(row.eps_fixedk, threshold_for_pfa(s.detector, s.k, s.n, s.case, row.target_pfa).unwrap());
        assert_eq!(
            row.eps_largek,
            large_k_baseline_threshold(s.detector, s.k, s.n, s.case, row.target_pfa, Some(&tw)).unwrap()
        );
    }
    assert!(rows.windows(2).all(|w| w[1].eps_fixedk < w[0].eps_fixedk));
    let again = run_threshold_experiment(&s).unwrap();
    assert_eq!(to_csv(&r.records), to_csv(&again.records));
}

#[test]
fn saturated_detection() {
    let mut s = spec(Experiment::Detection);
    s.n = 10_000;
    s.snr_db = Some(0.0);
    s.n_runs = 1000;
    let r = run_detection_experiment(&s).unwrap();
    let Records::Detection(rows) = &r.records else { panic!() };
    for row in rows {
        assert!(row.pd_empirical >= 0.999 && row.pd_fixedk >= 0.999, "{row:?}");
    }
}

#[test]
fn theory_calibration_uses_theory_thresholds() {
    let mut s = spec(Experiment::Detection);
    s.calibration = Calibration::Theory;
    s.snr_db = Some(-8.0);
    let r = run_detection_experiment(&s).unwrap();
    let Records::Detection(rows) = &r.records else { panic!() };
    let params = eigensense::evaluation::S1LawParams {
        mu1: r.metadata.stats["mu1"],
        mur: r.metadata.stats["mur"],
        q1: 1,
        qr: 1,
        alpha_m: r.metadata.stats["alpha"],
        alpha_c: r.metadata.stats["alpha_c"],
    };
    for row in rows {
        assert_eq!(row.eps_sim, threshold_for_pfa(s.detector, s.k, s.n, s.case, row.target_pfa).unwrap());
        let pd = theoretical_pd(s.detector, s.k, s.n, s.case, row.eps_sim, &params).unwrap();
        assert!((pd - row.pd_fixedk).abs() < 1e-9);
    }
    assert!(r.metadata.methods["threshold"].starts_with("theory"));
}

#[test]
fn sweep_covers_grid() {
    let mut s = spec(Experiment::Sweep);
    s.snr_grid_db = vec![-12.0, -6.0];
    s.pfa_grid = vec![0.05, 0.1];
    s.case = ValueCase::Complex;
    let r = run_sweep(&s).unwrap();
    let Records::Sweep(rows) = &r.records else { panic!() };
    assert_eq!(rows.len(), 4);
    assert!(rows[2].pd_empirical >= rows[0].pd_empirical);
    assert!(to_csv(&r.records).starts_with("snr_db,target_pfa,eps_sim"));
}

#[test]
fn wrong_experiment_is_rejected() {
    let s = spec(Experiment::Cdf);
    assert!(run_threshold_experiment(&s).unwrap_err().is_config());
    assert!(run_experiment(&s).is_ok());
}
