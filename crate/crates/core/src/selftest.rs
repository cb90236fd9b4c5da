//! Quick checks of the numerical core against closed forms and
//! independently computed references. Each check is cheap enough to run
//! from the command line.

use crate::analysis::{
    collapse, fit_scaling, threshold_current, CollapseOptions, CurvePoint, ResponseCurve,
    ThresholdPoint,
};
use crate::config::RunConfig;
use crate::error::Result;
use crate::photonics::{
    click_probability, contribution_decomposition, poisson_pmf, DetectorResponse, PhotonEnergy,
};
use crate::simulator::{universal_p, GroundTruthDetector};
use crate::tomography::{fit_response, FitOptions, SweepData, SweepRecord};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn outcome(name: &'static str, check: Result<(bool, String)>) -> CheckOutcome {
    match check {
        Ok((passed, detail)) => CheckOutcome {
            name,
            passed,
            detail,
        },
        Err(e) => CheckOutcome {
            name,
            passed: false,
            detail: format!("error: {e}"),
        },
    }
}

fn within(name: &str, got: f64, want: f64, tol: f64) -> (bool, String) {
    let err = (got - want).abs();
    (
        err <= tol,
        format!("{name} = {got:.9e}, reference {want:.9e}, |diff| {err:.2e} <= {tol:.0e}"),
    )
}

/// Poisson weights by the direct product `e^-x x^n / n!`; exact enough for
/// `x <= 50`.
fn direct_pmf(x: f64, n: u64) -> f64 {
    (1..=n).fold((-x).exp(), |acc, k| acc * x / k as f64)
}

fn pmf_check() -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for &x in &[1e-6, 0.3, 1.0, 4.5, 17.0, 42.0] {
        for n in 0..=120 {
            let want = direct_pmf(x, n);
            let got = poisson_pmf(x, n)?;
            if want > 1e-280 {
                worst = worst.max((got - want).abs() / want);
            }
        }
    }
    Ok((
        worst <= 1e-12,
        format!("worst relative error {worst:.2e} <= 1e-12"),
    ))
}

fn brute_force_check() -> Result<(bool, String)> {
    let r = DetectorResponse::new(0.3, vec![0.02, 0.2, 0.6], 0.95)?;
    let mut worst: f64 = 0.0;
    for &n in &[0.1, 2.0, 15.0, 80.0, 150.0] {
        let x: f64 = 0.3 * n;
        let brute: f64 = (1..400u64).map(|k| r.p_n(k) * direct_pmf(x, k)).sum();
        worst = worst.max((click_probability(&r, n)? - brute).abs());
    }
    Ok((worst <= 1e-12, format!("worst |diff| {worst:.2e} <= 1e-12")))
}

fn decomposition_check() -> Result<(bool, String)> {
    let r = DetectorResponse::new(0.05, vec![1e-3, 0.05, 0.3, 0.45], 0.5)?;
    let mut worst: f64 = 0.0;
    for &n in &[1.0, 40.0, 300.0, 5000.0] {
        let total: f64 = contribution_decomposition(&r, n)?
            .iter()
            .map(|c| c.value)
            .sum();
        worst = worst.max((total - click_probability(&r, n)?).abs());
    }
    Ok((
        worst <= 1e-12,
        format!("worst |sum - R| {worst:.2e} <= 1e-12"),
    ))
}

fn ideal_check() -> Result<(bool, String)> {
    let r = DetectorResponse::ideal(0.7, 4)?;
    let n: f64 = 3.0;
    Ok(within(
        "R",
        click_probability(&r, n)?,
        1.0 - (-0.7 * n).exp(),
        1e-14,
    ))
}

fn two_photon_check() -> Result<(bool, String)> {
    let r = DetectorResponse::new(0.5, vec![0.1, 0.5], 1.0)?;
    Ok(within(
        "R",
        click_probability(&r, 2.0)?,
        1.0 - 2.15 * (-1.0f64).exp(),
        1e-14,
    ))
}

fn noiseless_recovery_check() -> Result<(bool, String)> {
    let truth = DetectorResponse::new(2e-3, vec![0.01, 0.3], 0.9)?;
    let pulses: u64 = 1 << 60;
    let records = (0..30)
        .map(|i| {
            let n = 10f64.powf(1.0 + 4.0 * i as f64 / 29.0);
            let r = click_probability(&truth, n)?;
            Ok(SweepRecord {
                wavelength_nm: 1500.0,
                bias_current_ua: 17.0,
                mean_photon_number: n,
                pulses,
                clicks: (r * pulses as f64).round() as u64,
                repeat_index: 0,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let fit = fit_response(
        &SweepData::new(records, "noiseless"),
        &FitOptions::default().with_nmax(2),
    )?;
    let rel = |a: f64, b: f64| ((a - b) / b).abs();
    let worst = rel(fit.response.eta(), truth.eta())
        .max(rel(fit.response.p()[0], 0.01))
        .max(rel(fit.response.p()[1], 0.3))
        .max(rel(fit.response.p_tail(), 0.9));
    Ok((
        worst <= 1e-4,
        format!("worst relative error {worst:.2e} <= 1e-4"),
    ))
}

fn universal_curve_check() -> Result<(bool, String)> {
    let p = universal_p(&GroundTruthDetector::default(), 1, 19.0, 0.8266)?;
    let want = 0.5 / (1.0 + (-(19.0 + 2.9 * 0.8266 - 21.0) / 0.7f64).exp());
    Ok(within("p", p, want, 1e-15))
}

fn threshold_check() -> Result<(bool, String)> {
    // Exactly log-linear in current, crossing 0.1 at 14.5 µA.
    let pts = (0..4)
        .map(|i| {
            let ib = 13.0 + i as f64;
            CurvePoint {
                bias_current_ua: ib,
                p: 0.1 * 10f64.powf(0.5 * (ib - 14.5)),
                sigma_p: 1e-3,
            }
        })
        .collect();
    let curve = ResponseCurve::new(1500.0, 1, pts)?;
    Ok(within(
        "I_th",
        threshold_current(&curve, 0.1)?.current_ua,
        14.5,
        1e-12,
    ))
}

fn scaling_check() -> Result<(bool, String)> {
    let points: Vec<ThresholdPoint> = [0.8, 1.2, 1.7, 2.5]
        .iter()
        .map(|&e| ThresholdPoint {
            wavelength_nm: 1000.0,
            photon_number: 1,
            energy_ev: e,
            current_ua: 20.0 - 2.9 * e,
            sigma_current_ua: 0.1,
        })
        .collect();
    let fit = fit_scaling(&points)?;
    let err = (fit.gamma_ua_per_ev + 2.9)
        .abs()
        .max((fit.intercept_ua - 20.0).abs());
    Ok((
        err <= 1e-10,
        format!(
            "gamma {:.12}, intercept {:.12}",
            fit.gamma_ua_per_ev, fit.intercept_ua
        ),
    ))
}

fn collapse_check() -> Result<(bool, String)> {
    let d = GroundTruthDetector::default();
    let mut curves = Vec::new();
    for wl in [1000.0, 1500.0] {
        let e = PhotonEnergy::from_wavelength_nm(wl)?.energy_ev();
        for n in 1..=2u32 {
            let pts = (0..60)
                .map(|i| {
                    let ib = 8.0 + 0.25 * i as f64;
                    Ok(CurvePoint {
                        bias_current_ua: ib,
                        p: universal_p(&d, n, ib, e)?,
                        sigma_p: 1e-3,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            curves.push(ResponseCurve::new(wl, n, pts)?);
        }
    }
    let c = collapse(&curves, d.gamma_true, &CollapseOptions::default())?;
    // Binning alone spreads a noiseless curve by at most the log-slope
    // times the bin width.
    Ok((
        c.score <= 0.1,
        format!("score {:.4} dex over {:.2} decades", c.score, c.decades),
    ))
}

fn config_echo_check() -> Result<(bool, String)> {
    let cfg = RunConfig::default();
    let back = RunConfig::parse(&cfg.echo())?;
    Ok((
        back == cfg,
        "default configuration survives its echo".into(),
    ))
}

/// Runs every check; never panics.
pub fn run_selftest() -> Vec<CheckOutcome> {
    vec![
        outcome("poisson-pmf", pmf_check()),
        outcome("click-probability", brute_force_check()),
        outcome("decomposition", decomposition_check()),
        outcome("ideal-detector", ideal_check()),
        outcome("two-photon-example", two_photon_check()),
        outcome("noiseless-recovery", noiseless_recovery_check()),
        outcome("universal-curve", universal_curve_check()),
        outcome("threshold", threshold_check()),
        outcome("scaling", scaling_check()),
        outcome("collapse", collapse_check()),
        outcome("config-echo", config_echo_check()),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_checks_pass() {
        for c in run_selftest() {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }
}
