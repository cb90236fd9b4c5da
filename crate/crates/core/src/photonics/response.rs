//! Detector response parameters and the click-probability forward model.

use serde::{Deserialize, Serialize};

use super::poisson::{pmf_unchecked, sf_unchecked, truncation_order};
use crate::error::{Error, Result};

/// `h c` in eV nm.
pub const HC_EV_NM: f64 = 1239.8419;

/// Energy carried by one photon of a given vacuum wavelength.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhotonEnergy {
    wavelength_nm: f64,
    energy_ev: f64,
}

impl PhotonEnergy {
    pub fn from_wavelength_nm(wavelength_nm: f64) -> Result<Self> {
        if !(wavelength_nm.is_finite() && wavelength_nm > 0.0) {
            return Err(Error::Domain(format!(
                "wavelength must be positive, got {wavelength_nm} nm"
            )));
        }
        Ok(Self {
            wavelength_nm,
            energy_ev: HC_EV_NM / wavelength_nm,
        })
    }

    pub fn wavelength_nm(&self) -> f64 {
        self.wavelength_nm
    }

    pub fn energy_ev(&self) -> f64 {
        self.energy_ev
    }
}

/// Tomographic parameter set of a phase-insensitive click detector.
///
/// `eta` is the linear (incoupling) efficiency. `p[n-1]` is the probability
/// of a click given that exactly `n` photons reached the active area, for
/// `n = 1..=nmax`. Every photon number above `nmax` shares `p_tail`. The
/// vacuum never clicks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorResponse {
    eta: f64,
    p: Vec<f64>,
    p_tail: f64,
}

fn check_probability(name: &str, v: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::InvalidResponse(format!(
            "{name} = {v} is outside [0, 1]"
        )));
    }
    Ok(())
}

impl DetectorResponse {
    pub fn new(eta: f64, p: Vec<f64>, p_tail: f64) -> Result<Self> {
        check_probability("eta", eta)?;
        if p.is_empty() {
            return Err(Error::InvalidResponse("nmax must be at least 1".into()));
        }
        for (i, &pn) in p.iter().enumerate() {
            check_probability(&format!("p_{}", i + 1), pn)?;
        }
        check_probability("p_tail", p_tail)?;
        Ok(Self { eta, p, p_tail })
    }

    /// An ideal threshold detector: every non-vacuum state clicks.
    pub fn ideal(eta: f64, nmax: usize) -> Result<Self> {
        Self::new(eta, vec![1.0; nmax.max(1)], 1.0)
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn nmax(&self) -> usize {
        self.p.len()
    }

    /// `p_1..p_nmax`.
    pub fn p(&self) -> &[f64] {
        &self.p
    }

    pub fn p_tail(&self) -> f64 {
        self.p_tail
    }

    /// Click probability given exactly `n` absorbed photons.
    pub fn p_n(&self, n: u64) -> f64 {
        match n {
            0 => 0.0,
            n if (n as usize) <= self.p.len() => self.p[n as usize - 1],
            _ => self.p_tail,
        }
    }
}

/// Probability that the detector clicks for a coherent state of mean photon
/// number `mean_photon_number`.
///
/// Evaluates `1 - e^(-x) sum_n (1 - p_n) x^n / n!` with `x = eta N`,
/// summed up to `ceil(x + 12 sqrt(x) + 40)` with the remaining Poisson mass
/// added in closed form. Absolute error stays below `1e-12`.
pub fn click_probability(response: &DetectorResponse, mean_photon_number: f64) -> Result<f64> {
    if !mean_photon_number.is_finite() || mean_photon_number < 0.0 {
        return Err(Error::Domain(format!(
            "mean photon number must be finite and non-negative, got {mean_photon_number}"
        )));
    }
    let x = response.eta * mean_photon_number;
    if x == 0.0 {
        return Ok(0.0);
    }
    let n_cut = truncation_order(x);
    let mut no_click = 0.0;
    // Skip the far lower tail: below this order every mass is under e^-70.
    let n_lo = (x - 12.0 * x.sqrt() - 40.0).max(0.0).floor() as u64;
    for n in n_lo..=n_cut {
        no_click += (1.0 - response.p_n(n)) * pmf_unchecked(x, n);
    }
    no_click += (1.0 - response.p_tail) * sf_unchecked(x, n_cut);
    Ok((1.0 - no_click).clamp(0.0, 1.0))
}

/// One term of the per-photon-number split of the click probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ContributionOrder {
    /// Exactly `n` photons absorbed.
    Photons(u32),
    /// All photon numbers above `nmax`, lumped together.
    Tail,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Contribution {
    pub order: ContributionOrder,
    pub value: f64,
}

/// Splits the click probability into `p_n P(n; eta N)` for `n = 1..=nmax`
/// plus the lumped remainder `p_tail P(n > nmax; eta N)`. The terms sum to
/// [`click_probability`].
pub fn contribution_decomposition(
    response: &DetectorResponse,
    mean_photon_number: f64,
) -> Result<Vec<Contribution>> {
    if !mean_photon_number.is_finite() || mean_photon_number < 0.0 {
        return Err(Error::Domain(format!(
            "mean photon number must be finite and non-negative, got {mean_photon_number}"
        )));
    }
    let x = response.eta * mean_photon_number;
    let mut out: Vec<Contribution> = response
        .p
        .iter()
        .enumerate()
        .map(|(i, &pn)| Contribution {
            order: ContributionOrder::Photons(i as u32 + 1),
            value: pn * pmf_unchecked(x, i as u64 + 1),
        })
        .collect();
    out.push(Contribution {
        order: ContributionOrder::Tail,
        value: response.p_tail * sf_unchecked(x, response.nmax() as u64),
    });
    Ok(out)
}
