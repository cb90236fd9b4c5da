use rayon::prelude::*;

use super::data::SweepData;
use super::fit::{fit_response, FitOptions, FitStatus, ReconstructionResult};
use crate::error::{Error, Result};

/// Candidate orders tried by default.
pub const DEFAULT_ORDER_CANDIDATES: [usize; 6] = [1, 2, 3, 4, 5, 6];

/// AIC margin within which a smaller order is preferred.
pub const AIC_MARGIN: f64 = 2.0;

#[derive(Debug, Clone)]
pub struct OrderSelection {
    pub nmax: usize,
    pub no_signal: bool,
    /// `(nmax, AIC)` for each candidate that fitted.
    pub aic: Vec<(usize, f64)>,
    /// Reconstruction at the selected order.
    pub best: ReconstructionResult,
}

/// Picks the smallest order whose AIC (`2k + deviance`) lies within
/// [`AIC_MARGIN`] of the best candidate.
pub fn select_model_order(
    data: &SweepData,
    candidates: &[usize],
    opts: &FitOptions,
) -> Result<OrderSelection> {
    if candidates.is_empty() {
        return Err(Error::Domain("no model-order candidates".into()));
    }
    let mut sorted = candidates.to_vec();
    sorted.sort_unstable();
    sorted.dedup();

    let fits: Vec<(usize, Result<ReconstructionResult>)> = sorted
        .par_iter()
        .map(|&m| (m, fit_response(data, &opts.with_nmax(m))))
        .collect();

    if let Some((_, Ok(r))) = fits.first() {
        if r.status == FitStatus::NoSignal {
            return Ok(OrderSelection {
                nmax: r.nmax(),
                no_signal: true,
                aic: Vec::new(),
                best: r.clone(),
            });
        }
    }

    let mut first_err = None;
    let mut ok = Vec::new();
    for (m, f) in fits {
        match f {
            Ok(r) => ok.push((m, r)),
            Err(e @ Error::FitFailure { .. }) => {
                first_err.get_or_insert(e);
            }
            // Invalid data fails every candidate identically.
            Err(e) => return Err(e),
        }
    }
    if ok.is_empty() {
        return Err(first_err.expect("every candidate failed"));
    }
    let aic: Vec<(usize, f64)> = ok.iter().map(|(m, r)| (*m, r.aic())).collect();
    let min = aic.iter().map(|a| a.1).fold(f64::INFINITY, f64::min);
    let pick = aic
        .iter()
        .position(|a| a.1 <= min + AIC_MARGIN)
        .expect("minimum is always within margin");
    let (nmax, best) = ok.swap_remove(pick);
    Ok(OrderSelection {
        nmax,
        no_signal: false,
        aic,
        best,
    })
}
