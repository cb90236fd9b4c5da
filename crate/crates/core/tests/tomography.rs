//! Reconstruction on synthetic sweeps with known answers.

mod common;

use common::{noiseless_sweep, single_setting_plan};
use sspd_core::photonics::DetectorResponse;
use sspd_core::simulator::{
    ground_truth_response, log_ladder, simulate_campaign, GroundTruthDetector,
};
use sspd_core::tomography::{
    bootstrap_errors, fit_response, select_model_order, FitOptions, FitStatus, Parameterization,
    SweepData, SweepRecord, DEFAULT_ORDER_CANDIDATES,
};

#[test]
fn ideal_detector_fits_at_unit_deviance() {
    let truth = DetectorResponse::ideal(1e-2, 1).unwrap();
    let data = simulate_with(&truth, &log_ladder(1e0, 1e4, 25), 1_000_000, 7);
    let fit = fit_response(&data, &FitOptions::default().with_nmax(1)).unwrap();
    assert!(fit.converged());
    assert!(
        fit.deviance_per_dof <= 1.3,
        "deviance/dof {}",
        fit.deviance_per_dof
    );
    assert!((fit.response.eta() / 1e-2 - 1.0).abs() < 0.01);
    assert!(fit.response.p()[0] > 0.98);
}

#[test]
fn noiseless_two_photon_detector_is_recovered() {
    let truth = DetectorResponse::new(1e-3, vec![0.02, 0.7], 0.7).unwrap();
    let data = noiseless_sweep(&truth, &log_ladder(1e1, 1e7, 40), 1_000_000_000_000_000);
    let fit = fit_response(&data, &FitOptions::default().with_nmax(2)).unwrap();
    let r = &fit.response;
    assert!((r.eta() / 1e-3 - 1.0).abs() < 1e-3, "eta {}", r.eta());
    assert!((r.p()[0] - 0.02).abs() < 1e-4, "p1 {}", r.p()[0]);
    assert!((r.p()[1] - 0.7).abs() < 1e-3, "p2 {}", r.p()[1]);
    assert!((r.p_tail() - 0.7).abs() < 1e-3, "p_tail {}", r.p_tail());
}

#[test]
fn order_selection_prefers_smallest_adequate_order() {
    // Saturated single-photon response: order 1 suffices.
    let truth = DetectorResponse::new(1e-3, vec![0.5], 0.5).unwrap();
    let data = noiseless_sweep(&truth, &log_ladder(1e1, 1e7, 30), 1_000_000_000_000);
    let sel = select_model_order(&data, &DEFAULT_ORDER_CANDIDATES, &FitOptions::default()).unwrap();
    assert_eq!(sel.nmax, 1);

    // A genuine three-photon onset needs order 3.
    let truth = DetectorResponse::new(1e-3, vec![1e-4, 0.01, 0.5], 0.9).unwrap();
    let data = noiseless_sweep(&truth, &log_ladder(1e1, 1e7, 40), 1_000_000_000_000);
    let sel = select_model_order(&data, &DEFAULT_ORDER_CANDIDATES, &FitOptions::default()).unwrap();
    assert!(sel.nmax >= 3, "selected {}", sel.nmax);
}

#[test]
fn silent_detector_reports_no_signal() {
    let truth = DetectorResponse::new(1e-3, vec![0.0], 0.0).unwrap();
    let data = noiseless_sweep(&truth, &log_ladder(1e1, 1e7, 12), 1000);
    let sel = select_model_order(&data, &DEFAULT_ORDER_CANDIDATES, &FitOptions::default()).unwrap();
    assert!(sel.no_signal);
    assert_eq!(sel.best.status, FitStatus::NoSignal);
}

#[test]
fn monotone_parameterization_matches_on_ordered_truth() {
    let truth = DetectorResponse::new(1e-3, vec![0.01, 0.3], 0.8).unwrap();
    let data = noiseless_sweep(&truth, &log_ladder(1e1, 1e7, 40), 1_000_000_000_000_000);
    let opts = FitOptions {
        parameterization: Parameterization::Monotone,
        ..FitOptions::default()
    };
    let fit = fit_response(&data, &opts).unwrap();
    assert!((fit.response.p()[0] - 0.01).abs() < 1e-4);
    assert!((fit.response.p()[1] - 0.3).abs() < 1e-3);
    assert!((fit.response.p_tail() - 0.8).abs() < 1e-3);
}

#[test]
fn bootstrap_errors_shrink_as_inverse_sqrt_pulses() {
    // p_tail != p_nmax keeps eta locally identifiable; with p_tail = p_nmax
    // the eta direction is a combination of the p directions.
    let truth = DetectorResponse::new(1e-3, vec![0.05, 0.4], 0.9).unwrap();
    let ladder = log_ladder(1e1, 1e7, 30);
    let mut sd = Vec::new();
    for pulses in [100_000u64, 10_000_000] {
        let data = simulate_with(&truth, &ladder, pulses, 3);
        let fit = fit_response(&data, &FitOptions::default()).unwrap();
        let err = bootstrap_errors(&data, &fit, 60, 11).unwrap();
        let asym = fit.asymptotic_errors();
        assert!(
            (err.p[0] / asym.p[0] - 1.0).abs() < 0.3,
            "{err:?} vs {asym:?}"
        );
        sd.push(err.p[0]);
    }
    // 100x the pulses: errors drop by 10, within bootstrap scatter.
    let ratio = sd[0] / sd[1];
    assert!((6.0..16.0).contains(&ratio), "ratio {ratio}");
}

#[test]
fn bootstrap_is_reproducible_for_a_seed() {
    let truth = DetectorResponse::new(1e-3, vec![0.05, 0.6], 0.6).unwrap();
    let data = simulate_with(&truth, &log_ladder(1e1, 1e7, 20), 1_000_000, 5);
    let fit = fit_response(&data, &FitOptions::default()).unwrap();
    let a = bootstrap_errors(&data, &fit, 20, 42).unwrap();
    let b = bootstrap_errors(&data, &fit, 20, 42).unwrap();
    assert_eq!(a, b);
    let c = bootstrap_errors(&data, &fit, 20, 43).unwrap();
    assert_ne!(a, c);
}

#[test]
fn simulated_setting_round_trip() {
    let det = GroundTruthDetector::default();
    let plan = single_setting_plan(1500.0, 15.0, 9);
    let data = &simulate_campaign(&det, &plan).unwrap()[0];
    let truth = ground_truth_response(&det, 1500.0, 15.0).unwrap();
    let sel = select_model_order(data, &DEFAULT_ORDER_CANDIDATES, &FitOptions::default()).unwrap();
    let errs = bootstrap_errors(data, &sel.best, 100, 1).unwrap();
    for n in 1..=sel.nmax {
        let p_true = truth.p_n(n as u64);
        if !(1e-4..=0.3).contains(&p_true) {
            continue;
        }
        let p_fit = sel.best.response.p_n(n as u64);
        assert!(
            (p_fit - p_true).abs() <= 4.0 * errs.p[n - 1],
            "n={n} fit {p_fit} true {p_true} sd {}",
            errs.p[n - 1]
        );
    }
}

#[test]
fn records_without_light_are_ignored() {
    let truth = DetectorResponse::new(1e-3, vec![0.05, 0.6], 0.6).unwrap();
    let mut data = noiseless_sweep(&truth, &log_ladder(1e1, 1e7, 20), 1_000_000_000_000);
    let before = fit_response(&data, &FitOptions::default()).unwrap();
    data.records.push(SweepRecord {
        mean_photon_number: 0.0,
        clicks: 0,
        ..data.records[0]
    });
    let after = fit_response(&data, &FitOptions::default()).unwrap();
    assert!((before.response.p()[0] - after.response.p()[0]).abs() < 1e-9);
}

fn simulate_with(truth: &DetectorResponse, ladder: &[f64], pulses: u64, seed: u64) -> SweepData {
    use rand::SeedableRng;
    use rand_distr::{Binomial, Distribution};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let records = ladder
        .iter()
        .map(|&n| {
            let r = sspd_core::click_probability(truth, n).unwrap();
            SweepRecord {
                wavelength_nm: 1500.0,
                bias_current_ua: 17.0,
                mean_photon_number: n,
                pulses,
                clicks: Binomial::new(pulses, r).unwrap().sample(&mut rng),
                repeat_index: 0,
            }
        })
        .collect();
    SweepData::new(records, "synthetic")
}
