use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::photonics::PhotonEnergy;
use crate::tomography::ReconstructionResult;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub bias_current_ua: f64,
    pub p: f64,
    pub sigma_p: f64,
}

/// `p_n` against bias current for one wavelength and photon number.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseCurve {
    pub wavelength_nm: f64,
    pub photon_number: u32,
    points: Vec<CurvePoint>,
}

impl ResponseCurve {
    pub fn new(wavelength_nm: f64, photon_number: u32, points: Vec<CurvePoint>) -> Result<Self> {
        if photon_number == 0 {
            return Err(Error::Domain("photon number must be at least 1".into()));
        }
        PhotonEnergy::from_wavelength_nm(wavelength_nm)?;
        if points
            .windows(2)
            .any(|w| !(w[0].bias_current_ua < w[1].bias_current_ua))
        {
            return Err(Error::Domain(
                "response curve currents must be strictly increasing".into(),
            ));
        }
        if let Some(bad) = points.iter().find(|p| !(0.0..=1.0).contains(&p.p)) {
            return Err(Error::Domain(format!(
                "probability {} outside [0, 1]",
                bad.p
            )));
        }
        Ok(Self {
            wavelength_nm,
            photon_number,
            points,
        })
    }

    pub fn points(&self) -> &[CurvePoint] {
        &self.points
    }

    /// Total excitation energy `n h nu` in eV.
    pub fn energy_ev(&self) -> f64 {
        self.photon_number as f64 * crate::photonics::HC_EV_NM / self.wavelength_nm
    }
}

/// Collects reconstructed `p_n` into one curve per `(wavelength, n)`,
/// keeping only converged fits and orders `n <= nmax`.
///
/// Uncertainties come from the bootstrap when present and from the inverse
/// Fisher information otherwise.
pub fn response_curves(results: &[ReconstructionResult]) -> Result<Vec<ResponseCurve>> {
    let mut groups: BTreeMap<(u64, u32), Vec<CurvePoint>> = BTreeMap::new();
    let mut wavelengths: BTreeMap<u64, f64> = BTreeMap::new();
    for r in results.iter().filter(|r| r.converged()) {
        let key = r.wavelength_nm.to_bits();
        wavelengths.insert(key, r.wavelength_nm);
        let sig = r
            .standard_errors
            .as_ref()
            .map(|e| e.p.clone())
            .unwrap_or_else(|| r.asymptotic_errors().p);
        for (i, (&p, &s)) in r.response.p().iter().zip(&sig).enumerate() {
            groups
                .entry((key, i as u32 + 1))
                .or_default()
                .push(CurvePoint {
                    bias_current_ua: r.bias_current_ua,
                    p,
                    sigma_p: s,
                });
        }
    }
    let mut out = Vec::with_capacity(groups.len());
    for ((wl_key, n), mut pts) in groups {
        pts.sort_by(|a, b| a.bias_current_ua.total_cmp(&b.bias_current_ua));
        out.push(ResponseCurve::new(wavelengths[&wl_key], n, pts)?);
    }
    // Order by wavelength value, then photon number.
    out.sort_by(|a, b| {
        a.wavelength_nm
            .total_cmp(&b.wavelength_nm)
            .then(a.photon_number.cmp(&b.photon_number))
    });
    Ok(out)
}
