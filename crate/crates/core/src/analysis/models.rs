//! Microscopic detection models fitted to threshold currents.
//!
//! Each model is written as threshold current against total energy, with
//! exactly one parameter carrying the arbitrary choice of threshold level:
//!
//! * normal-core hotspot: `I = I_s (1 - (C/w) sqrt(E))`, free `I_s, C`
//! * diffusion hotspot: `I = I_s (1 - E/E_0)`, free `I_s, E_0`
//! * fluctuation: `I = (I_0 - A / (Delta - alpha sqrt(E))) / beta`, free
//!   `A, alpha` with `Delta, I_0, beta` supplied by the caller.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::threshold::ThresholdPoint;
use crate::error::{Error, Result};
use crate::optim::{minimize, psd_inverse, Evaluation, LmOptions, Objective};

/// Bowtie wire width, nm.
pub const DEFAULT_WIRE_WIDTH_NM: f64 = 150.0;
/// Critical current, µA.
pub const DEFAULT_CRITICAL_CURRENT_UA: f64 = 29.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    NormalCore,
    Diffusion,
    Fluctuation,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [
        ModelKind::NormalCore,
        ModelKind::Diffusion,
        ModelKind::Fluctuation,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::NormalCore => "normal-core",
            ModelKind::Diffusion => "diffusion",
            ModelKind::Fluctuation => "fluctuation",
        }
    }

    pub fn parameter_names(self) -> [&'static str; 2] {
        match self {
            ModelKind::NormalCore => ["current_scale_uA", "C_per_sqrt_eV_per_nm"],
            ModelKind::Diffusion => ["current_scale_uA", "E0_eV"],
            ModelKind::Fluctuation => ["A", "alpha_sqrt_eV"],
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Domain(format!("unknown model kind {s:?}")))
    }
}

/// Linearization constants of the fluctuation barrier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluctuationConstants {
    /// Gap energy scale, eV.
    pub delta_ev: f64,
    /// µA.
    pub i0_ua: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConstants {
    pub wire_width_nm: f64,
    pub critical_current_ua: f64,
    pub fluctuation: Option<FluctuationConstants>,
}

impl Default for ModelConstants {
    fn default() -> Self {
        Self {
            wire_width_nm: DEFAULT_WIRE_WIDTH_NM,
            critical_current_ua: DEFAULT_CRITICAL_CURRENT_UA,
            fluctuation: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFit {
    pub kind: ModelKind,
    pub parameters: [f64; 2],
    pub errors: [f64; 2],
    pub covariance: [[f64; 2]; 2],
    pub chi2: f64,
    pub dof: usize,
    pub chi2_per_dof: f64,
    /// Why the fit should not be trusted, if it should not.
    pub flag: Option<String>,
    pub constants: ModelConstants,
}

impl ModelFit {
    pub fn predict(&self, energy_ev: f64) -> f64 {
        model_current(self.kind, &self.constants, &self.parameters, energy_ev).0
    }
}

/// Threshold current and its gradient with respect to the two free
/// parameters.
fn model_current(kind: ModelKind, k: &ModelConstants, theta: &[f64; 2], e: f64) -> (f64, [f64; 2]) {
    let [a, b] = *theta;
    match kind {
        ModelKind::NormalCore => {
            let w = k.wire_width_nm;
            let s = e.sqrt();
            let f = 1.0 - b / w * s;
            (a * f, [f, -a * s / w])
        }
        ModelKind::Diffusion => {
            let f = 1.0 - e / b;
            (a * f, [f, a * e / (b * b)])
        }
        ModelKind::Fluctuation => {
            let c = k.fluctuation.expect("checked by caller");
            let s = e.sqrt();
            let d = c.delta_ev - b * s;
            (
                (c.i0_ua - a / d) / c.beta,
                [-1.0 / (c.beta * d), -a * s / (c.beta * d * d)],
            )
        }
    }
}

struct ThresholdLeastSquares<'a> {
    kind: ModelKind,
    constants: &'a ModelConstants,
    points: &'a [ThresholdPoint],
}

impl ThresholdLeastSquares<'_> {
    fn in_domain(&self, theta: &[f64; 2]) -> bool {
        match self.kind {
            ModelKind::Fluctuation => {
                let c = self.constants.fluctuation.expect("checked by caller");
                self.points
                    .iter()
                    .all(|p| c.delta_ev - theta[1] * p.energy_ev.sqrt() > 0.0)
            }
            ModelKind::Diffusion => theta[1] != 0.0,
            ModelKind::NormalCore => true,
        }
    }
}

impl Objective for ThresholdLeastSquares<'_> {
    fn dim(&self) -> usize {
        2
    }

    fn evaluate(&self, x: &DVector<f64>) -> Option<Evaluation> {
        let theta = [x[0], x[1]];
        if !self.in_domain(&theta) {
            return None;
        }
        let n = self.points.len();
        let mut r = DVector::zeros(n);
        let mut j = DMatrix::zeros(n, 2);
        for (i, p) in self.points.iter().enumerate() {
            let (model, grad) = model_current(self.kind, self.constants, &theta, p.energy_ev);
            let s = p.sigma_current_ua;
            r[i] = (model - p.current_ua) / s;
            j[(i, 0)] = grad[0] / s;
            j[(i, 1)] = grad[1] / s;
        }
        let value = 0.5 * r.norm_squared();
        value.is_finite().then(|| Evaluation {
            value,
            gradient: j.transpose() * &r,
            curvature: j.transpose() * &j,
        })
    }
}

/// Weighted straight line `y = a + b x`; returns `(a, b)`.
fn weighted_line(xs: &[f64], ys: &[f64], w: &[f64]) -> Option<(f64, f64)> {
    let sw: f64 = w.iter().sum();
    let xm = xs.iter().zip(w).map(|(x, w)| x * w).sum::<f64>() / sw;
    let ym = ys.iter().zip(w).map(|(y, w)| y * w).sum::<f64>() / sw;
    let sxx: f64 = xs.iter().zip(w).map(|(x, w)| w * (x - xm).powi(2)).sum();
    let sxy: f64 = xs
        .iter()
        .zip(ys)
        .zip(w)
        .map(|((x, y), w)| w * (x - xm) * (y - ym))
        .sum();
    if !(sxx > 0.0) {
        return None;
    }
    let b = sxy / sxx;
    Some((ym - b * xm, b))
}

/// Grid points of the fluctuation start-value scan over alpha.
const FLUCTUATION_SCAN: usize = 200;

fn initial_guess(
    kind: ModelKind,
    k: &ModelConstants,
    points: &[ThresholdPoint],
) -> Option<[f64; 2]> {
    let w: Vec<f64> = points.iter().map(|p| p.sigma_current_ua.powi(-2)).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.current_ua).collect();
    let sqrt_e: Vec<f64> = points.iter().map(|p| p.energy_ev.sqrt()).collect();
    match kind {
        ModelKind::NormalCore => {
            let (a, b) = weighted_line(&sqrt_e, &ys, &w)?;
            Some([a, -b * k.wire_width_nm / a])
        }
        ModelKind::Diffusion => {
            let e: Vec<f64> = points.iter().map(|p| p.energy_ev).collect();
            let (a, b) = weighted_line(&e, &ys, &w)?;
            Some([a, -a / b])
        }
        ModelKind::Fluctuation => {
            // At fixed alpha the model is linear in A; scan alpha over the
            // range that keeps Delta - alpha sqrt(E) positive at every point.
            let c = k.fluctuation?;
            let s_max = sqrt_e.iter().cloned().fold(0.0, f64::max);
            let alpha_max = c.delta_ev / s_max;
            let mut best: Option<(f64, [f64; 2])> = None;
            for i in 0..FLUCTUATION_SCAN {
                let alpha = alpha_max * (2.0 * i as f64 / FLUCTUATION_SCAN as f64 - 1.0);
                // beta I = I0 - A g with g = 1 / (Delta - alpha sqrt(E)).
                let g: Vec<f64> = sqrt_e
                    .iter()
                    .map(|s| 1.0 / (c.delta_ev - alpha * s))
                    .collect();
                let sgg: f64 = g.iter().zip(&w).map(|(g, w)| w * g * g).sum();
                let sgy: f64 = g
                    .iter()
                    .zip(&ys)
                    .zip(&w)
                    .map(|((g, y), w)| w * g * (c.i0_ua - c.beta * y))
                    .sum();
                let amp = sgy / sgg;
                let chi2: f64 = g
                    .iter()
                    .zip(&ys)
                    .zip(&w)
                    .map(|((g, y), w)| w * ((c.i0_ua - amp * g) / c.beta - y).powi(2))
                    .sum();
                if chi2.is_finite() && best.is_none_or(|(b, _)| chi2 < b) {
                    best = Some((chi2, [amp, alpha]));
                }
            }
            best.map(|(_, theta)| theta)
        }
    }
}

fn bound_violation(kind: ModelKind, theta: &[f64; 2]) -> Option<String> {
    let [a, b] = *theta;
    match kind {
        ModelKind::NormalCore if a <= 0.0 || b <= 0.0 => {
            Some(format!("current scale {a} or C {b} not positive"))
        }
        ModelKind::Diffusion if a <= 0.0 || b <= 0.0 => {
            Some(format!("current scale {a} or E0 {b} not positive"))
        }
        _ => None,
    }
}

/// Least-squares fit of one detection model to threshold points, weighted
/// by their current uncertainties.
pub fn fit_model(
    points: &[ThresholdPoint],
    kind: ModelKind,
    constants: &ModelConstants,
) -> Result<ModelFit> {
    if points.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "{} fit needs at least 3 threshold points, got {}",
            kind.name(),
            points.len()
        )));
    }
    if kind == ModelKind::Fluctuation && constants.fluctuation.is_none() {
        return Err(Error::Config(
            "fluctuation model needs explicit Delta, I_0 and beta".into(),
        ));
    }
    if points
        .iter()
        .any(|p| !(p.sigma_current_ua > 0.0) || !(p.energy_ev > 0.0))
    {
        return Err(Error::Domain(
            "threshold points need positive energy and uncertainty".into(),
        ));
    }
    let start = initial_guess(kind, constants, points)
        .ok_or_else(|| Error::Singular("threshold energies are all equal".into()))?;
    let objective = ThresholdLeastSquares {
        kind,
        constants,
        points,
    };
    let report = minimize(
        &objective,
        DVector::from_vec(start.to_vec()),
        &LmOptions::default(),
    );
    let theta = [report.x[0], report.x[1]];
    let mut flag = None;
    if !report.termination.converged() {
        flag = Some(format!("optimizer stopped: {:?}", report.termination));
    }
    if let Some(v) = bound_violation(kind, &theta) {
        flag.get_or_insert(v);
    }
    let curvature = report
        .evaluation
        .as_ref()
        .map(|e| e.curvature.clone())
        .unwrap_or_else(|| DMatrix::zeros(2, 2));
    let cov = psd_inverse(&curvature);
    let chi2 = 2.0 * report.value;
    let dof = points.len() - 2;
    Ok(ModelFit {
        kind,
        parameters: theta,
        errors: [cov[(0, 0)].sqrt(), cov[(1, 1)].sqrt()],
        covariance: [[cov[(0, 0)], cov[(0, 1)]], [cov[(1, 0)], cov[(1, 1)]]],
        chi2,
        dof,
        chi2_per_dof: chi2 / dof as f64,
        flag,
        constants: *constants,
    })
}
