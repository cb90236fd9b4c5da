#![allow(dead_code)]

use sspd_core::photonics::{truncation_order, DetectorResponse};
use sspd_core::simulator::{CampaignPlan, GroundTruthDetector};
use sspd_core::tomography::{SweepData, SweepRecord};

/// Poisson masses over `0..=len` from the recurrence `w_{n+1} = w_n x/(n+1)`
/// anchored at the mode and normalized by their own sum. Shares no code
/// with the library's saddle-point evaluation.
pub fn normalized_poisson(x: f64, len: u64) -> Vec<f64> {
    if x == 0.0 {
        let mut v = vec![0.0; len as usize + 1];
        v[0] = 1.0;
        return v;
    }
    let mode = (x.floor() as u64).min(len);
    let mut w = vec![0.0; len as usize + 1];
    w[mode as usize] = 1.0;
    for n in mode + 1..=len {
        w[n as usize] = w[n as usize - 1] * x / n as f64;
    }
    for n in (0..mode).rev() {
        w[n as usize] = w[n as usize + 1] * (n + 1) as f64 / x;
    }
    let total: f64 = w.iter().sum();
    w.iter().map(|v| v / total).collect()
}

/// `1 - sum_n (1 - p_n) P(n)` summed term by term over at least 200 terms
/// and ten times the library's truncation order, with no closed-form tail.
pub fn brute_force_click_probability(r: &DetectorResponse, n: f64) -> f64 {
    let x = r.eta() * n;
    let len = (10 * truncation_order(x)).max(200);
    let pmf = normalized_poisson(x, len);
    let no_click: f64 = pmf
        .iter()
        .enumerate()
        .map(|(k, &m)| (1.0 - r.p_n(k as u64)) * m)
        .sum();
    1.0 - no_click
}

/// Records carrying the expected click count (rounded) at a very large pulse
/// number, so that rounding is far below any tolerance of interest.
pub fn noiseless_sweep(r: &DetectorResponse, powers: &[f64], pulses: u64) -> SweepData {
    let records = powers
        .iter()
        .map(|&n| {
            let p = sspd_core::click_probability(r, n).unwrap();
            SweepRecord {
                wavelength_nm: 1500.0,
                bias_current_ua: 17.0,
                mean_photon_number: n,
                pulses,
                clicks: (p * pulses as f64).round() as u64,
                repeat_index: 0,
            }
        })
        .collect();
    SweepData::new(records, "noiseless")
}

pub fn single_setting_plan(wavelength_nm: f64, bias_current_ua: f64, seed: u64) -> CampaignPlan {
    CampaignPlan {
        wavelengths_nm: vec![wavelength_nm],
        bias_currents_ua: vec![bias_current_ua],
        seed,
        ..Default::default()
    }
}

pub fn default_detector() -> GroundTruthDetector {
    GroundTruthDetector::default()
}
