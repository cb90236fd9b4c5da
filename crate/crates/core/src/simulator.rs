//! Synthetic measurement campaigns from a detector that obeys a universal
//! response curve.
//!
//! The ground truth assigns every `n`-photon excitation at bias current
//! `I_b` the probability `S(u)` with `u = I_b - gamma n h nu`, where `S` is a
//! logistic curve saturating at `p_sat`.

use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::photonics::{click_probability, DetectorResponse, PhotonEnergy};
use crate::rng::{float_key, keyed_rng};
use crate::tomography::{SweepData, SweepRecord};

/// Orders given their own probability in simulated responses; all higher
/// orders share the probability of the next one.
pub const SIMULATED_ORDERS: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthDetector {
    /// Slope of the iso-probability line, µA/eV (negative).
    pub gamma_true: f64,
    /// Center of the logistic response, µA.
    pub u0: f64,
    /// Width of the logistic response, µA.
    pub width: f64,
    pub p_sat: f64,
    pub eta_true: f64,
    /// Critical current, µA.
    pub ic: f64,
    pub dark_rate_hz: f64,
}

impl Default for GroundTruthDetector {
    fn default() -> Self {
        Self {
            gamma_true: -2.9,
            u0: 21.0,
            width: 0.7,
            p_sat: 0.5,
            eta_true: 1e-3,
            ic: 29.0,
            dark_rate_hz: 0.0,
        }
    }
}

impl GroundTruthDetector {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.width > 0.0) {
            return bad(format!(
                "detector width must be positive, got {}",
                self.width
            ));
        }
        if !(self.p_sat > 0.0 && self.p_sat <= 1.0) {
            return bad(format!("p_sat must lie in (0, 1], got {}", self.p_sat));
        }
        if !(0.0..=1.0).contains(&self.eta_true) {
            return bad(format!(
                "eta_true must lie in [0, 1], got {}",
                self.eta_true
            ));
        }
        if !(self.dark_rate_hz >= 0.0) || !self.gamma_true.is_finite() || !self.ic.is_finite() {
            return bad("dark rate, gamma and critical current must be finite (rate >= 0)".into());
        }
        Ok(())
    }

    /// Universal-curve coordinate `I_b - gamma E` for total energy `E`.
    pub fn universal_coordinate(&self, bias_current_ua: f64, energy_ev: f64) -> f64 {
        bias_current_ua - self.gamma_true * energy_ev
    }

    /// The universal curve `S(u)`.
    pub fn curve(&self, u: f64) -> f64 {
        self.p_sat / (1.0 + (-(u - self.u0) / self.width).exp())
    }

    /// Inverse of [`Self::curve`]: the coordinate at which `S(u) = level`.
    pub fn inverse_curve(&self, level: f64) -> f64 {
        self.u0 + self.width * (level / (self.p_sat - level)).ln()
    }

    /// Bias current at which an excitation of total energy `E` is detected
    /// with probability `level`.
    pub fn threshold_current(&self, energy_ev: f64, level: f64) -> f64 {
        self.inverse_curve(level) + self.gamma_true * energy_ev
    }
}

/// Detection probability of an `n`-photon excitation at bias `bias_current_ua`.
pub fn universal_p(
    detector: &GroundTruthDetector,
    n: u32,
    bias_current_ua: f64,
    photon_energy_ev: f64,
) -> Result<f64> {
    if n == 0 {
        return Err(Error::Domain("photon number must be at least 1".into()));
    }
    if bias_current_ua > detector.ic {
        return Err(Error::Domain(format!(
            "bias current {bias_current_ua} uA exceeds the critical current {} uA",
            detector.ic
        )));
    }
    let u = detector.universal_coordinate(bias_current_ua, n as f64 * photon_energy_ev);
    Ok(detector.curve(u))
}

/// The detector response a ground truth implies at one setting.
pub fn ground_truth_response(
    detector: &GroundTruthDetector,
    wavelength_nm: f64,
    bias_current_ua: f64,
) -> Result<DetectorResponse> {
    let e = PhotonEnergy::from_wavelength_nm(wavelength_nm)?.energy_ev();
    let p = (1..=SIMULATED_ORDERS as u32)
        .map(|n| universal_p(detector, n, bias_current_ua, e))
        .collect::<Result<Vec<_>>>()?;
    let tail = universal_p(detector, SIMULATED_ORDERS as u32 + 1, bias_current_ua, e)?;
    DetectorResponse::new(detector.eta_true, p, tail)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignPlan {
    pub wavelengths_nm: Vec<f64>,
    pub bias_currents_ua: Vec<f64>,
    pub mean_photon_numbers: Vec<f64>,
    pub pulses_per_window: u64,
    /// Length of one counting window, seconds.
    pub window_s: f64,
    pub repeats: u32,
    pub seed: u64,
}

/// `count` values spaced evenly in log between `lo` and `hi` inclusive.
pub fn log_ladder(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.log10(), hi.log10());
            (0..count)
                .map(|i| 10f64.powf(a + (b - a) * i as f64 / (count - 1) as f64))
                .collect()
        }
    }
}

/// `start, start + step, ..` up to and including `stop` (within rounding).
/// Values are rounded to 1e-9 so that decimal steps print cleanly.
pub fn linear_grid(start: f64, stop: f64, step: f64) -> Vec<f64> {
    if !(step > 0.0) || stop < start {
        return Vec::new();
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    (0..=n)
        .map(|i| ((start + step * i as f64) * 1e9).round() / 1e9)
        .collect()
}

impl Default for CampaignPlan {
    fn default() -> Self {
        Self {
            wavelengths_nm: vec![1000.0, 1300.0, 1500.0],
            bias_currents_ua: linear_grid(12.0, 22.0, 0.5),
            mean_photon_numbers: log_ladder(1e1, 1e7, 30),
            pulses_per_window: 1_000_000,
            window_s: 0.1,
            repeats: 10,
            seed: 1,
        }
    }
}

impl CampaignPlan {
    pub fn validate(&self) -> Result<()> {
        if self.wavelengths_nm.is_empty()
            || self.bias_currents_ua.is_empty()
            || self.mean_photon_numbers.is_empty()
        {
            return Err(Error::Config(
                "campaign grids (wavelengths, currents, photon numbers) must be non-empty".into(),
            ));
        }
        if self.repeats == 0 {
            return Err(Error::Config("repeats must be at least 1".into()));
        }
        if self
            .mean_photon_numbers
            .iter()
            .any(|n| !(n.is_finite() && *n >= 0.0))
        {
            return Err(Error::Config(
                "photon numbers must be finite and non-negative".into(),
            ));
        }
        if !(self.window_s > 0.0) {
            return Err(Error::Config("window length must be positive".into()));
        }
        Ok(())
    }

    pub fn num_records(&self) -> usize {
        self.wavelengths_nm.len()
            * self.bias_currents_ua.len()
            * self.mean_photon_numbers.len()
            * self.repeats as usize
    }
}

/// Per-pulse probability of a click given the optical click probability
/// `r` and dark counts arriving as a Poisson process across the pulse's
/// share of the window.
pub fn with_dark_counts(r: f64, dark_rate_hz: f64, gate_s: f64) -> f64 {
    1.0 - (1.0 - r) * (-dark_rate_hz * gate_s).exp()
}

/// Simulates one sweep file per `(wavelength, bias current)`, ordered by
/// wavelength then current.
pub fn simulate_campaign(
    detector: &GroundTruthDetector,
    plan: &CampaignPlan,
) -> Result<Vec<SweepData>> {
    detector.validate()?;
    plan.validate()?;
    let gate_s = plan.window_s / plan.pulses_per_window.max(1) as f64;
    let settings: Vec<(f64, f64)> = plan
        .wavelengths_nm
        .iter()
        .flat_map(|&wl| plan.bias_currents_ua.iter().map(move |&ib| (wl, ib)))
        .collect();
    settings
        .par_iter()
        .map(|&(wl, ib)| {
            let response = ground_truth_response(detector, wl, ib)?;
            let mut records =
                Vec::with_capacity(plan.mean_photon_numbers.len() * plan.repeats as usize);
            for &n in &plan.mean_photon_numbers {
                let r = with_dark_counts(
                    click_probability(&response, n)?,
                    detector.dark_rate_hz,
                    gate_s,
                )
                .clamp(0.0, 1.0);
                let binom = Binomial::new(plan.pulses_per_window, r)
                    .map_err(|e| Error::Domain(format!("binomial sampler: {e}")))?;
                for rep in 0..plan.repeats {
                    let mut rng = keyed_rng(
                        plan.seed,
                        &[float_key(wl), float_key(ib), float_key(n), rep as u64],
                    );
                    records.push(SweepRecord {
                        wavelength_nm: wl,
                        bias_current_ua: ib,
                        mean_photon_number: n,
                        pulses: plan.pulses_per_window,
                        clicks: binom.sample(&mut rng),
                        repeat_index: rep,
                    });
                }
            }
            Ok(SweepData::new(
                records,
                format!("simulated {wl} nm {ib} uA"),
            ))
        })
        .collect()
}
