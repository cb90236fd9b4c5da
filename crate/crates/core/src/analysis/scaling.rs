use serde::{Deserialize, Serialize};

use super::threshold::ThresholdPoint;
use crate::error::{Error, Result};

/// Weighted straight-line fit of threshold current against total energy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    /// Slope `dI/dE`, µA/eV.
    pub gamma_ua_per_ev: f64,
    /// Current at zero energy, µA.
    pub intercept_ua: f64,
    /// Covariance of `(gamma, intercept)`.
    pub covariance: [[f64; 2]; 2],
    pub chi2: f64,
    pub dof: usize,
}

impl ScalingFit {
    pub fn sigma_gamma(&self) -> f64 {
        self.covariance[0][0].sqrt()
    }

    pub fn sigma_intercept(&self) -> f64 {
        self.covariance[1][1].sqrt()
    }

    pub fn predict(&self, energy_ev: f64) -> f64 {
        self.intercept_ua + self.gamma_ua_per_ev * energy_ev
    }
}

/// Least squares of current on energy with weights `1/sigma^2`.
pub fn fit_scaling(points: &[ThresholdPoint]) -> Result<ScalingFit> {
    if points.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "scaling fit needs at least 3 threshold points, got {}",
            points.len()
        )));
    }
    if let Some(p) = points.iter().find(|p| !(p.sigma_current_ua > 0.0)) {
        return Err(Error::Domain(format!(
            "threshold at {} eV has non-positive uncertainty",
            p.energy_ev
        )));
    }
    let w: Vec<f64> = points.iter().map(|p| p.sigma_current_ua.powi(-2)).collect();
    let sw: f64 = w.iter().sum();
    let e_mean = points
        .iter()
        .zip(&w)
        .map(|(p, w)| w * p.energy_ev)
        .sum::<f64>()
        / sw;
    let i_mean = points
        .iter()
        .zip(&w)
        .map(|(p, w)| w * p.current_ua)
        .sum::<f64>()
        / sw;
    let sxx: f64 = points
        .iter()
        .zip(&w)
        .map(|(p, w)| w * (p.energy_ev - e_mean).powi(2))
        .sum();
    let scale = points.iter().map(|p| p.energy_ev.abs()).fold(0.0, f64::max);
    if !(sxx > 1e-24 * sw * scale * scale) {
        return Err(Error::Singular(
            "all threshold points share one energy".into(),
        ));
    }
    let sxy: f64 = points
        .iter()
        .zip(&w)
        .map(|(p, w)| w * (p.energy_ev - e_mean) * (p.current_ua - i_mean))
        .sum();
    let gamma = sxy / sxx;
    let intercept = i_mean - gamma * e_mean;
    let var_gamma = 1.0 / sxx;
    let var_intercept = 1.0 / sw + e_mean * e_mean / sxx;
    let cov = -e_mean / sxx;
    let chi2 = points
        .iter()
        .zip(&w)
        .map(|(p, w)| w * (p.current_ua - intercept - gamma * p.energy_ev).powi(2))
        .sum();
    Ok(ScalingFit {
        gamma_ua_per_ev: gamma,
        intercept_ua: intercept,
        covariance: [[var_gamma, cov], [cov, var_intercept]],
        chi2,
        dof: points.len() - 2,
    })
}

/// The zero-energy end of the scaling line, compared with the critical
/// current.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DarkExtrapolation {
    pub current_ua: f64,
    pub sigma_ua: f64,
    pub critical_current_ua: f64,
    pub ratio_to_critical: f64,
}

impl DarkExtrapolation {
    pub fn note(&self) -> String {
        format!(
            "zero-energy excitation would reach the threshold at {:.2} +/- {:.2} uA, {:.2} of the \
             {:.1} uA critical current; dark counts treated as E = 0 photons would appear there",
            self.current_ua, self.sigma_ua, self.ratio_to_critical, self.critical_current_ua
        )
    }
}

/// Extrapolates the scaling line to `E = 0`.
pub fn extrapolate_dark(fit: &ScalingFit, critical_current_ua: f64) -> DarkExtrapolation {
    DarkExtrapolation {
        current_ua: fit.intercept_ua,
        sigma_ua: fit.sigma_intercept(),
        critical_current_ua,
        ratio_to_critical: fit.intercept_ua / critical_current_ua,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn line_points(energies: &[f64], sigma: f64) -> Vec<ThresholdPoint> {
        energies
            .iter()
            .map(|&e| ThresholdPoint {
                wavelength_nm: 1500.0,
                photon_number: 1,
                energy_ev: e,
                current_ua: 19.4 - 2.9 * e,
                sigma_current_ua: sigma,
            })
            .collect()
    }

    #[test]
    fn exact_line_is_recovered() {
        let pts = line_points(&[0.827, 1.653, 2.480], 0.1);
        let f = fit_scaling(&pts).unwrap();
        assert_relative_eq!(f.gamma_ua_per_ev, -2.9, max_relative = 1e-12);
        assert_relative_eq!(f.intercept_ua, 19.4, max_relative = 1e-12);
        for p in &pts {
            assert!((f.predict(p.energy_ev) - p.current_ua).abs() < 1e-12);
        }
        let d = extrapolate_dark(&f, 29.0);
        assert_relative_eq!(d.current_ua, 19.4, max_relative = 1e-12);
        assert_relative_eq!(d.ratio_to_critical, 19.4 / 29.0, max_relative = 1e-12);
    }

    #[test]
    fn covariance_is_psd_and_matches_normal_equations() {
        let mut pts = line_points(&[0.8, 1.0, 1.3, 1.7, 2.5], 0.1);
        pts[2].sigma_current_ua = 0.3;
        let f = fit_scaling(&pts).unwrap();
        // Uncentered normal equations as an independent route.
        let (mut s, mut sx, mut sxx) = (0.0, 0.0, 0.0);
        for p in &pts {
            let w = p.sigma_current_ua.powi(-2);
            s += w;
            sx += w * p.energy_ev;
            sxx += w * p.energy_ev * p.energy_ev;
        }
        let det = s * sxx - sx * sx;
        assert_relative_eq!(f.covariance[0][0], s / det, max_relative = 1e-10);
        assert_relative_eq!(f.covariance[1][1], sxx / det, max_relative = 1e-10);
        assert_relative_eq!(f.covariance[0][1], -sx / det, max_relative = 1e-10);
        let c = f.covariance;
        assert!(c[0][0] >= 0.0 && c[1][1] >= 0.0 && c[0][0] * c[1][1] - c[0][1] * c[1][0] >= 0.0);
    }

    #[test]
    fn singular_and_short_inputs() {
        assert!(matches!(
            fit_scaling(&line_points(&[1.0, 1.0, 1.0], 0.1)),
            Err(Error::Singular(_))
        ));
        assert!(matches!(
            fit_scaling(&line_points(&[1.0, 2.0], 0.1)),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn intercept_uncertainty_grows_without_high_energy_points() {
        let all = line_points(&[0.83, 0.95, 1.24, 1.65, 1.91, 2.48], 0.1);
        let full = fit_scaling(&all).unwrap();
        let trimmed = fit_scaling(&all[..4]).unwrap();
        assert!(trimmed.sigma_intercept() > full.sigma_intercept());
    }
}
