//! Threshold, scaling and collapse invariants on exactly known curves.

use proptest::prelude::*;
use sspd_core::analysis::{
    best_gamma, collapse, fit_scaling, scan_gamma, threshold_current, CollapseOptions, CurvePoint,
    ResponseCurve, ThresholdPoint,
};
use sspd_core::photonics::PhotonEnergy;
use sspd_core::simulator::{linear_grid, universal_p, GroundTruthDetector};

fn log_linear_curve(crossing: f64, slope_dex_per_ua: f64) -> ResponseCurve {
    let pts = linear_grid(10.0, 20.0, 0.5)
        .into_iter()
        .map(|ib| CurvePoint {
            bias_current_ua: ib,
            p: (0.1 * 10f64.powf(slope_dex_per_ua * (ib - crossing))).min(1.0),
            sigma_p: 1e-3,
        })
        .collect();
    ResponseCurve::new(1500.0, 1, pts).unwrap()
}

fn universal_curves(d: &GroundTruthDetector, currents: &[f64]) -> Vec<ResponseCurve> {
    let mut out = Vec::new();
    for wl in [1000.0, 1300.0, 1500.0] {
        let e = PhotonEnergy::from_wavelength_nm(wl).unwrap().energy_ev();
        for n in 1..=3u32 {
            let pts = currents
                .iter()
                .map(|&ib| CurvePoint {
                    bias_current_ua: ib,
                    p: universal_p(d, n, ib, e).unwrap(),
                    sigma_p: 1e-3,
                })
                .collect();
            out.push(ResponseCurve::new(wl, n, pts).unwrap());
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn interpolation_is_exact_on_log_linear_curves(crossing in 11.0..19.0f64, slope in 0.2..1.5f64) {
        let t = threshold_current(&log_linear_curve(crossing, slope), 0.1).unwrap();
        prop_assert!((t.current_ua - crossing).abs() < 1e-9);
        prop_assert!(t.sigma_current_ua >= 0.0);
    }

    #[test]
    fn scaling_fit_is_exact_on_lines(gamma in -5.0..-0.5f64, intercept in 10.0..28.0f64) {
        let pts: Vec<ThresholdPoint> = [0.83, 0.95, 1.24, 1.65, 1.91, 2.48]
            .iter()
            .map(|&e| ThresholdPoint {
                wavelength_nm: 1000.0,
                photon_number: 1,
                energy_ev: e,
                current_ua: intercept + gamma * e,
                sigma_current_ua: 0.1,
            })
            .collect();
        let fit = fit_scaling(&pts).unwrap();
        prop_assert!((fit.gamma_ua_per_ev - gamma).abs() < 1e-9);
        prop_assert!((fit.intercept_ua - intercept).abs() < 1e-9);
        let c = fit.covariance;
        prop_assert!(c[0][0] >= 0.0 && c[1][1] >= 0.0 && c[0][0] * c[1][1] >= c[0][1] * c[0][1]);
    }

    #[test]
    fn collapse_score_is_non_negative(gamma in -4.0..-2.0f64) {
        let d = GroundTruthDetector::default();
        let curves = universal_curves(&d, &linear_grid(12.0, 22.0, 0.5));
        let c = collapse(&curves, gamma, &CollapseOptions::default()).unwrap();
        prop_assert!(c.score >= 0.0);
        prop_assert!(c.points.windows(2).all(|w| w[0].u_ua <= w[1].u_ua));
    }
}

#[test]
fn noiseless_curves_collapse_at_the_generating_slope() {
    let d = GroundTruthDetector::default();
    let curves = universal_curves(&d, &linear_grid(8.0, 22.0, 0.1));
    let scan = scan_gamma(
        &curves,
        &linear_grid(-4.0, -2.0, 0.05),
        &CollapseOptions::default(),
    );
    let best = best_gamma(&scan).unwrap();
    assert!((best - d.gamma_true).abs() <= 0.05 + 1e-9, "argmin {best}");
    let at_truth = collapse(&curves, d.gamma_true, &CollapseOptions::default()).unwrap();
    assert!(at_truth.decades >= 3.0);
    assert!(at_truth.score < 0.1, "score {}", at_truth.score);
}

#[test]
fn equal_total_energy_gives_equal_thresholds() {
    let d = GroundTruthDetector::default();
    let currents = linear_grid(8.0, 22.0, 0.25);
    let curve = |wl: f64, n: u32| {
        let e = PhotonEnergy::from_wavelength_nm(wl).unwrap().energy_ev();
        let pts = currents
            .iter()
            .map(|&ib| CurvePoint {
                bias_current_ua: ib,
                p: universal_p(&d, n, ib, e).unwrap(),
                sigma_p: 1e-3,
            })
            .collect();
        ResponseCurve::new(wl, n, pts).unwrap()
    };
    let one = threshold_current(&curve(750.0, 1), 0.1).unwrap();
    let two = threshold_current(&curve(1500.0, 2), 0.1).unwrap();
    assert!((one.energy_ev - two.energy_ev).abs() < 1e-12);
    assert!((one.current_ua - two.current_ua).abs() < 1e-9);
}
