//! From reconstructed `p_n(I_b, lambda)` to threshold currents, the
//! energy-current scaling law, the universal response curve, model fits,
//! and the zero-energy extrapolation.

mod collapse;
mod curves;
mod models;
mod scaling;
mod threshold;

pub use collapse::{
    best_gamma, collapse, scan_gamma, Collapse, CollapseOptions, CollapsedPoint,
    DEFAULT_BIN_WIDTH_UA,
};
pub use curves::{response_curves, CurvePoint, ResponseCurve};
pub use models::{
    fit_model, FluctuationConstants, ModelConstants, ModelFit, ModelKind,
    DEFAULT_CRITICAL_CURRENT_UA, DEFAULT_WIRE_WIDTH_NM,
};
pub use scaling::{extrapolate_dark, fit_scaling, DarkExtrapolation, ScalingFit};
pub use threshold::{
    apply_sigma_policy, threshold_current, SigmaOverride, ThresholdPoint, DEFAULT_LEVEL,
    MIN_THRESHOLD_SIGMA_UA, READOUT_FLOOR_UA,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simulator::linear_grid;
use crate::tomography::ReconstructionResult;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisOptions {
    pub level: f64,
    pub min_sigma_ua: f64,
    pub sigma_overrides: Vec<SigmaOverride>,
    pub collapse: CollapseOptions,
    pub gamma_grid: Vec<f64>,
    pub constants: ModelConstants,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self {
            level: DEFAULT_LEVEL,
            min_sigma_ua: MIN_THRESHOLD_SIGMA_UA,
            sigma_overrides: Vec::new(),
            collapse: CollapseOptions::default(),
            gamma_grid: linear_grid(-4.0, -2.0, 0.05),
            constants: ModelConstants::default(),
        }
    }
}

/// A curve that produced no threshold point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exclusion {
    pub wavelength_nm: f64,
    pub photon_number: u32,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct AnalysisReport {
    pub curves: Vec<ResponseCurve>,
    pub thresholds: Vec<ThresholdPoint>,
    pub exclusions: Vec<Exclusion>,
    pub scaling: ScalingFit,
    pub collapse: Collapse,
    pub gamma_scan: Vec<(f64, Option<f64>)>,
    pub best_gamma: Option<f64>,
    pub model_fits: Vec<ModelFit>,
    pub dark: DarkExtrapolation,
}

/// Threshold points for every curve that brackets the level; the rest are
/// reported as exclusions. Uncertainties follow the floor and overrides in
/// `opts`.
pub fn threshold_points(
    curves: &[ResponseCurve],
    opts: &AnalysisOptions,
) -> (Vec<ThresholdPoint>, Vec<Exclusion>) {
    let mut points = Vec::new();
    let mut exclusions = Vec::new();
    for c in curves {
        match threshold_current(c, opts.level) {
            Ok(t) => points.push(t),
            Err(e) => exclusions.push(Exclusion {
                wavelength_nm: c.wavelength_nm,
                photon_number: c.photon_number,
                reason: e.to_string(),
            }),
        }
    }
    apply_sigma_policy(&mut points, opts.min_sigma_ua, &opts.sigma_overrides);
    (points, exclusions)
}

/// Runs the full analysis chain on a set of reconstructions.
pub fn run_analysis(
    results: &[ReconstructionResult],
    opts: &AnalysisOptions,
) -> Result<AnalysisReport> {
    if opts.constants.fluctuation.is_none() {
        return Err(Error::Config(
            "fluctuation constants (Delta, I_0, beta) must be given explicitly".into(),
        ));
    }
    if !(opts.level > 0.0 && opts.level < 1.0) {
        return Err(Error::Config(format!(
            "threshold level {} outside (0, 1)",
            opts.level
        )));
    }
    let curves = response_curves(results)?;
    let mut wavelengths: Vec<u64> = curves.iter().map(|c| c.wavelength_nm.to_bits()).collect();
    wavelengths.sort_unstable();
    wavelengths.dedup();
    let max_order = curves.iter().map(|c| c.photon_number).max().unwrap_or(0);
    if wavelengths.len() < 2 && max_order < 2 {
        return Err(Error::InsufficientData(
            "analysis needs at least two wavelengths or two photon orders".into(),
        ));
    }
    let (thresholds, exclusions) = threshold_points(&curves, opts);
    let scaling = fit_scaling(&thresholds)?;
    let collapse = collapse(&curves, scaling.gamma_ua_per_ev, &opts.collapse)?;
    let gamma_scan = scan_gamma(&curves, &opts.gamma_grid, &opts.collapse);
    let best = best_gamma(&gamma_scan);
    let model_fits = ModelKind::ALL
        .iter()
        .map(|&k| fit_model(&thresholds, k, &opts.constants))
        .collect::<Result<Vec<_>>>()?;
    let dark = extrapolate_dark(&scaling, opts.constants.critical_current_ua);
    Ok(AnalysisReport {
        curves,
        thresholds,
        exclusions,
        scaling,
        collapse,
        gamma_scan,
        best_gamma: best,
        model_fits,
        dark,
    })
}
