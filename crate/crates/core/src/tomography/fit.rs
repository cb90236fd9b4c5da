use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::data::SweepData;
use super::likelihood::{
    aggregate, half_deviance, point_model, BinomialObjective, Cell, Parameterization,
};
use super::profile::profile_start;
use crate::error::{Error, Result};
use crate::optim::{minimize, psd_inverse, LmOptions, LmReport, Objective};
use crate::photonics::DetectorResponse;

/// Number of fixed-grid starting points per reconstruction. The best point
/// of a profile-likelihood scan over `eta` is tried in addition.
pub const NUM_STARTS: usize = 5;

#[derive(Debug, Clone, Copy)]
pub struct FitOptions {
    pub nmax: usize,
    pub parameterization: Parameterization,
    pub lm: LmOptions,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            nmax: 2,
            parameterization: Parameterization::Independent,
            lm: LmOptions::default(),
        }
    }
}

impl FitOptions {
    pub fn with_nmax(mut self, nmax: usize) -> Self {
        self.nmax = nmax;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FitStatus {
    Converged,
    /// Every record had zero clicks; probabilities sit at their lower bound.
    NoSignal,
}

/// Standard errors in natural units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseErrors {
    pub eta: f64,
    pub p: Vec<f64>,
    pub p_tail: f64,
}

#[derive(Debug, Clone)]
pub struct ReconstructionResult {
    pub wavelength_nm: f64,
    pub bias_current_ua: f64,
    pub response: DetectorResponse,
    pub status: FitStatus,
    pub parameterization: Parameterization,
    /// Optimum in transformed space: `[ln eta, theta_1..theta_nmax, theta_tail]`.
    pub parameters: Vec<f64>,
    /// Inverse Fisher information over the transformed parameters.
    pub covariance: DMatrix<f64>,
    /// Filled in by [`super::bootstrap_errors`].
    pub standard_errors: Option<ResponseErrors>,
    /// Record-level binomial deviance.
    pub deviance: f64,
    pub dof: usize,
    pub deviance_per_dof: f64,
}

impl ReconstructionResult {
    pub fn nmax(&self) -> usize {
        self.response.nmax()
    }

    /// Free parameters: `eta`, `p_1..p_nmax`, `p_tail`.
    pub fn num_parameters(&self) -> usize {
        self.nmax() + 2
    }

    pub fn aic(&self) -> f64 {
        2.0 * self.num_parameters() as f64 + self.deviance
    }

    pub fn converged(&self) -> bool {
        self.status == FitStatus::Converged
    }

    /// Delta-method standard errors from the inverse Fisher information.
    pub fn asymptotic_errors(&self) -> ResponseErrors {
        let m = self.nmax();
        if !self.converged() {
            return ResponseErrors {
                eta: 0.0,
                p: vec![0.0; m],
                p_tail: 0.0,
            };
        }
        let probs = self.parameterization.probabilities(&self.parameters[1..]);
        let w = m + 1;
        let sub = self.covariance.view((1, 1), (w, w)).into_owned();
        let cov_p = &probs.jac * sub * probs.jac.transpose();
        let sd: Vec<f64> = (0..w).map(|i| cov_p[(i, i)].max(0.0).sqrt()).collect();
        ResponseErrors {
            eta: self.response.eta() * self.covariance[(0, 0)].max(0.0).sqrt(),
            p: sd[..m].to_vec(),
            p_tail: sd[m],
        }
    }

    /// Natural-unit parameter vector `[eta, p_1..p_nmax, p_tail]`.
    pub fn natural_parameters(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.num_parameters());
        v.push(self.response.eta());
        v.extend_from_slice(self.response.p());
        v.push(self.response.p_tail());
        v
    }
}

/// Record-level deviance of a sweep at a response.
pub fn sweep_deviance(data: &SweepData, response: &DetectorResponse) -> f64 {
    let probs = natural_probabilities(response);
    data.records
        .iter()
        .filter(|r| r.mean_photon_number > 0.0)
        .map(|r| {
            let pm = point_model(response.eta() * r.mean_photon_number, &probs);
            2.0 * half_deviance(
                r.clicks as f64,
                r.pulses as f64,
                pm.r.max(1e-300),
                pm.q.max(1e-300),
            )
        })
        .sum()
}

fn natural_probabilities(response: &DetectorResponse) -> super::likelihood::Probabilities {
    let mut p: Vec<f64> = response.p().to_vec();
    p.push(response.p_tail());
    let q = p.iter().map(|v| 1.0 - v).collect();
    let m = p.len();
    super::likelihood::Probabilities {
        p,
        q,
        jac: DMatrix::zeros(m, m),
    }
}

/// Deterministic starting points for one block.
///
/// `eta` comes from the slope `R/N` at the weakest illumination that gave
/// clicks, `p_tail` from the largest observed click fraction, and the
/// `p_n` from threshold patterns over `{1e-3, 1e-1}`: orders up to `k` get
/// `1e-3`, higher orders `1e-1`.
pub(crate) fn initial_guesses(cells: &[Cell], nmax: usize) -> Vec<(f64, Vec<f64>)> {
    let max_fraction = cells
        .iter()
        .map(|c| c.clicks / c.pulses)
        .fold(0.0f64, f64::max);
    let p_tail = max_fraction.clamp(0.02, 0.98);
    let slope = cells
        .iter()
        .find(|c| c.clicks > 0.0)
        .map(|c| c.clicks / c.pulses / c.mean_photon_number)
        .unwrap_or(1e-6);

    let pattern = |k: usize| -> (f64, Vec<f64>) {
        let mut p: Vec<f64> = (1..=nmax)
            .map(|n| if n <= k { 1e-3 } else { 1e-1 })
            .collect();
        p.push(p_tail);
        let eta = (slope / p[0]).clamp(1e-12, 1.0);
        (eta, p)
    };

    let ks: Vec<usize> = if nmax + 1 > NUM_STARTS {
        vec![0, 1, 2, nmax - 1, nmax]
    } else {
        (0..=nmax).collect()
    };
    let mut starts: Vec<(f64, Vec<f64>)> = ks.iter().map(|&k| pattern(k)).collect();
    let base = starts.clone();
    let mut i = 0;
    while starts.len() < NUM_STARTS {
        let (eta, p) = &base[(i / 2) % base.len()];
        let scale = if i % 2 == 0 { 10.0 } else { 0.1 };
        starts.push(((eta * scale).clamp(1e-12, 1.0), p.clone()));
        i += 1;
    }
    starts
}

fn no_signal_result(data: &SweepData, opts: &FitOptions) -> Result<ReconstructionResult> {
    let k = opts.nmax + 2;
    let response = DetectorResponse::new(0.0, vec![0.0; opts.nmax], 0.0)?;
    let n_records = data
        .records
        .iter()
        .filter(|r| r.mean_photon_number > 0.0)
        .count();
    Ok(ReconstructionResult {
        wavelength_nm: data.wavelength_nm().unwrap_or(f64::NAN),
        bias_current_ua: data.bias_current_ua().unwrap_or(f64::NAN),
        response,
        status: FitStatus::NoSignal,
        parameterization: opts.parameterization,
        parameters: vec![f64::NEG_INFINITY; k],
        covariance: DMatrix::zeros(k, k),
        standard_errors: None,
        deviance: 0.0,
        dof: n_records.saturating_sub(k),
        deviance_per_dof: 0.0,
    })
}

/// Runs the optimizer from every start and keeps the lowest objective.
pub(crate) fn best_of(
    objective: &BinomialObjective,
    starts: Vec<DVector<f64>>,
    lm: &LmOptions,
) -> Result<LmReport> {
    let n_starts = starts.len();
    let reports: Vec<LmReport> = starts
        .into_iter()
        .map(|s| minimize(objective, s, lm))
        .collect();
    let best_converged = reports
        .iter()
        .filter(|r| r.termination.converged())
        .min_by(|a, b| a.value.total_cmp(&b.value));
    match best_converged {
        Some(r) => Ok(r.clone()),
        None => {
            let best = reports
                .iter()
                .min_by(|a, b| a.value.total_cmp(&b.value))
                .expect("at least one start");
            Err(Error::FitFailure {
                starts: n_starts,
                best_objective: best.value,
                best_parameters: best.x.iter().copied().collect(),
            })
        }
    }
}

pub(crate) fn response_from_parameters(
    parameterization: Parameterization,
    eta_log: f64,
    theta: &[f64],
) -> Result<DetectorResponse> {
    let probs = parameterization.probabilities(theta);
    let m = theta.len() - 1;
    let eta = eta_log.exp();
    if eta > 1.0 {
        return Err(Error::InvalidResponse(format!(
            "fitted linear efficiency {eta} exceeds 1; check the photon-number calibration"
        )));
    }
    DetectorResponse::new(eta, probs.p[..m].to_vec(), probs.p[m])
}

fn transformed_start(parameterization: Parameterization, eta: f64, p: &[f64]) -> Vec<f64> {
    let mut v = vec![eta.ln()];
    v.extend(parameterization.parameters(p));
    v
}

/// Maximum-likelihood reconstruction of `eta` and `p_1..p_nmax, p_tail`
/// from one power sweep.
pub fn fit_response(data: &SweepData, opts: &FitOptions) -> Result<ReconstructionResult> {
    if opts.nmax == 0 {
        return Err(Error::Domain("nmax must be at least 1".into()));
    }
    data.validate()?;
    if data.total_clicks() == 0 {
        return no_signal_result(data, opts);
    }
    let cells = aggregate(data);
    let mut guesses = initial_guesses(&cells, opts.nmax);
    guesses.extend(profile_start(&cells, opts.nmax));
    let starts: Vec<DVector<f64>> = guesses
        .into_iter()
        .map(|(eta, p)| DVector::from_vec(transformed_start(opts.parameterization, eta, &p)))
        .collect();
    let objective = BinomialObjective::new(vec![(cells, opts.nmax)], opts.parameterization);
    let report = best_of(&objective, starts, &opts.lm)?;
    finish(data, &objective, &report, opts.parameterization)
}

/// Refits from a known parameter vector (single start). Used by the
/// bootstrap.
pub(crate) fn refit_from(
    data: &SweepData,
    start: &[f64],
    nmax: usize,
    parameterization: Parameterization,
    lm: &LmOptions,
) -> Result<ReconstructionResult> {
    let cells = aggregate(data);
    let objective = BinomialObjective::new(vec![(cells, nmax)], parameterization);
    let report = best_of(&objective, vec![DVector::from_column_slice(start)], lm)?;
    finish(data, &objective, &report, parameterization)
}

fn finish(
    data: &SweepData,
    objective: &BinomialObjective,
    report: &LmReport,
    parameterization: Parameterization,
) -> Result<ReconstructionResult> {
    let x = &report.x;
    let response = response_from_parameters(parameterization, x[0], &x.as_slice()[1..])?;
    let curvature = match &report.evaluation {
        Some(e) => e.curvature.clone(),
        None => objective
            .evaluate(x)
            .map(|e| e.curvature)
            .unwrap_or_else(|| DMatrix::zeros(x.len(), x.len())),
    };
    // Curvature of half the deviance is the Fisher information.
    let covariance = psd_inverse(&curvature);
    let deviance = sweep_deviance(data, &response);
    let n_records = data
        .records
        .iter()
        .filter(|r| r.mean_photon_number > 0.0)
        .count();
    let k = x.len();
    let dof = n_records.saturating_sub(k);
    Ok(ReconstructionResult {
        wavelength_nm: data.wavelength_nm().unwrap_or(f64::NAN),
        bias_current_ua: data.bias_current_ua().unwrap_or(f64::NAN),
        response,
        status: super::FitStatus::Converged,
        parameterization,
        parameters: x.iter().copied().collect(),
        covariance,
        standard_errors: None,
        deviance,
        dof,
        deviance_per_dof: if dof > 0 {
            deviance / dof as f64
        } else {
            f64::NAN
        },
    })
}

/// Joint reconstruction of several sweeps taken at one wavelength with a
/// single shared linear efficiency.
///
/// Each sweep is first fitted on its own; the joint fit starts from those
/// optima with `ln eta` at their median. Per-sweep covariances are the
/// `[ln eta, theta..]` sub-blocks of the joint inverse Fisher matrix, and
/// per-sweep `dof` counts only the sweep's own probabilities.
pub fn fit_shared_eta(
    sweeps: &[SweepData],
    nmax: &[usize],
    opts: &FitOptions,
) -> Result<Vec<ReconstructionResult>> {
    if sweeps.is_empty() || sweeps.len() != nmax.len() {
        return Err(Error::Domain(
            "shared-eta fit needs one model order per sweep".into(),
        ));
    }
    let wl = sweeps[0].wavelength_nm();
    if sweeps.iter().any(|s| s.wavelength_nm() != wl) {
        return Err(Error::InvalidSweep(
            "shared-eta fit requires a single wavelength".into(),
        ));
    }
    let mut individual = Vec::with_capacity(sweeps.len());
    for (s, &m) in sweeps.iter().zip(nmax) {
        individual.push(fit_response(s, &opts.with_nmax(m))?);
    }
    let active: Vec<usize> = (0..sweeps.len())
        .filter(|&i| individual[i].converged())
        .collect();
    if active.is_empty() {
        return Ok(individual);
    }
    let mut log_etas: Vec<f64> = active
        .iter()
        .map(|&i| individual[i].parameters[0])
        .collect();
    log_etas.sort_by(f64::total_cmp);
    let mut start = vec![log_etas[log_etas.len() / 2]];
    let mut blocks = Vec::with_capacity(active.len());
    for &i in &active {
        start.extend_from_slice(&individual[i].parameters[1..]);
        blocks.push((aggregate(&sweeps[i]), nmax[i]));
    }
    let objective = BinomialObjective::new(blocks, opts.parameterization);
    let report = best_of(&objective, vec![DVector::from_vec(start)], &opts.lm)?;
    let curvature = report
        .evaluation
        .as_ref()
        .map(|e| e.curvature.clone())
        .unwrap_or_else(|| DMatrix::zeros(report.x.len(), report.x.len()));
    let joint_cov = psd_inverse(&curvature);

    let mut out = individual;
    for (b, &i) in objective.blocks.iter().zip(&active) {
        let theta = &report.x.as_slice()[b.offset..b.offset + b.width()];
        let response = response_from_parameters(opts.parameterization, report.x[0], theta)?;
        let mut idx = vec![0];
        idx.extend(b.offset..b.offset + b.width());
        let cov = DMatrix::from_fn(idx.len(), idx.len(), |r, c| joint_cov[(idx[r], idx[c])]);
        let deviance = sweep_deviance(&sweeps[i], &response);
        let n_records = sweeps[i]
            .records
            .iter()
            .filter(|r| r.mean_photon_number > 0.0)
            .count();
        let dof = n_records.saturating_sub(b.width());
        let mut parameters = vec![report.x[0]];
        parameters.extend_from_slice(theta);
        out[i] = ReconstructionResult {
            wavelength_nm: sweeps[i].wavelength_nm().unwrap_or(f64::NAN),
            bias_current_ua: sweeps[i].bias_current_ua().unwrap_or(f64::NAN),
            response,
            status: FitStatus::Converged,
            parameterization: opts.parameterization,
            parameters,
            covariance: cov,
            standard_errors: None,
            deviance,
            dof,
            deviance_per_dof: if dof > 0 {
                deviance / dof as f64
            } else {
                f64::NAN
            },
        };
    }
    Ok(out)
}
