use serde::{Deserialize, Serialize};

use super::curves::ResponseCurve;
use crate::error::{Error, Result};

pub const DEFAULT_LEVEL: f64 = 0.1;
/// Accuracy of the bias-current readout, µA.
pub const READOUT_FLOOR_UA: f64 = 0.05;
/// Smallest uncertainty assigned to a threshold used in fits, µA.
pub const MIN_THRESHOLD_SIGMA_UA: f64 = 0.1;

/// Bias current at which an excitation of total energy `energy_ev` reaches
/// the threshold detection probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdPoint {
    pub wavelength_nm: f64,
    pub photon_number: u32,
    pub energy_ev: f64,
    pub current_ua: f64,
    pub sigma_current_ua: f64,
}

/// Interpolates the current where `p = level`, linear in `log10 p` between
/// the first adjacent pair of points that brackets the level.
///
/// The uncertainty propagates both endpoint `sigma_p` to first order and
/// adds the readout floor in quadrature.
pub fn threshold_current(curve: &ResponseCurve, level: f64) -> Result<ThresholdPoint> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Domain(format!(
            "threshold level {level} outside (0, 1)"
        )));
    }
    let pts: Vec<_> = curve.points().iter().filter(|p| p.p > 0.0).collect();
    let ell = level.log10();
    for w in pts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let brackets = (a.p <= level && level <= b.p) || (b.p <= level && level <= a.p);
        if !brackets {
            continue;
        }
        let (la, lb) = (a.p.log10(), b.p.log10());
        let di = b.bias_current_ua - a.bias_current_ua;
        let (current, grad_a, grad_b) = if la == lb {
            // Flat at exactly the level.
            (a.bias_current_ua, 0.0, 0.0)
        } else {
            let t = (ell - la) / (lb - la);
            let denom = (lb - la) * (lb - la);
            (
                a.bias_current_ua + t * di,
                di * (ell - lb) / denom,
                -di * (ell - la) / denom,
            )
        };
        let ln10 = std::f64::consts::LN_10;
        let sa = grad_a * a.sigma_p / (a.p * ln10);
        let sb = grad_b * b.sigma_p / (b.p * ln10);
        let sigma = (sa * sa + sb * sb + READOUT_FLOOR_UA * READOUT_FLOOR_UA).sqrt();
        return Ok(ThresholdPoint {
            wavelength_nm: curve.wavelength_nm,
            photon_number: curve.photon_number,
            energy_ev: curve.energy_ev(),
            current_ua: current,
            sigma_current_ua: sigma,
        });
    }
    Err(Error::NoThreshold { level })
}

/// Per-series replacement of a threshold uncertainty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SigmaOverride {
    pub wavelength_nm: f64,
    pub photon_number: u32,
    pub sigma_ua: f64,
}

/// Raises every uncertainty to at least `min_sigma_ua`, then applies the
/// explicit overrides.
pub fn apply_sigma_policy(
    points: &mut [ThresholdPoint],
    min_sigma_ua: f64,
    overrides: &[SigmaOverride],
) {
    for p in points.iter_mut() {
        p.sigma_current_ua = p.sigma_current_ua.max(min_sigma_ua);
        if let Some(o) = overrides
            .iter()
            .find(|o| o.wavelength_nm == p.wavelength_nm && o.photon_number == p.photon_number)
        {
            p.sigma_current_ua = o.sigma_ua;
        }
    }
}
