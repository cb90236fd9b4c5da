use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;

use super::data::SweepData;
use super::fit::{refit_from, ReconstructionResult, ResponseErrors};
use crate::error::{Error, Result};
use crate::optim::LmOptions;
use crate::photonics::click_probability;
use crate::rng::keyed_rng;

pub const DEFAULT_RESAMPLES: usize = 200;

/// Largest tolerated fraction of failed refits.
pub const MAX_FAILED_FRACTION: f64 = 0.2;

/// Parametric bootstrap: redraws every record's clicks from
/// `Binomial(pulses, R_fit(N))`, refits at the same order starting from the
/// point estimate, and reports the standard deviation of each natural
/// parameter across resamples.
///
/// Resample `i` draws from the stream keyed by `(seed, i)`, so the result
/// does not depend on scheduling.
pub fn bootstrap_errors(
    data: &SweepData,
    result: &ReconstructionResult,
    resamples: usize,
    seed: u64,
) -> Result<ResponseErrors> {
    if !result.converged() {
        return Err(Error::InsufficientData(
            "bootstrap needs a converged reconstruction".into(),
        ));
    }
    if resamples < 2 {
        return Err(Error::Domain(
            "bootstrap needs at least two resamples".into(),
        ));
    }
    let fitted: Vec<f64> = data
        .records
        .iter()
        .map(|r| click_probability(&result.response, r.mean_photon_number))
        .collect::<Result<_>>()?;
    let lm = LmOptions::default();

    let draws: Vec<Option<Vec<f64>>> = (0..resamples)
        .into_par_iter()
        .map(|i| {
            let mut rng = keyed_rng(seed, &[0xB007, i as u64]);
            let mut resampled = data.clone();
            for (rec, &r) in resampled.records.iter_mut().zip(&fitted) {
                rec.clicks = if rec.pulses == 0 {
                    0
                } else {
                    Binomial::new(rec.pulses, r.clamp(0.0, 1.0))
                        .expect("probability clamped to [0, 1]")
                        .sample(&mut rng)
                };
            }
            refit_from(
                &resampled,
                &result.parameters,
                result.nmax(),
                result.parameterization,
                &lm,
            )
            .ok()
            .map(|r| r.natural_parameters())
        })
        .collect();

    let failed = draws.iter().filter(|d| d.is_none()).count();
    if failed as f64 > MAX_FAILED_FRACTION * resamples as f64 {
        return Err(Error::BootstrapFailure {
            failed,
            total: resamples,
        });
    }
    let ok: Vec<&Vec<f64>> = draws.iter().flatten().collect();
    let k = result.num_parameters();
    let sd: Vec<f64> = (0..k)
        .map(|j| {
            let n = ok.len() as f64;
            let mean = ok.iter().map(|v| v[j]).sum::<f64>() / n;
            let var = ok.iter().map(|v| (v[j] - mean).powi(2)).sum::<f64>() / (n - 1.0);
            var.sqrt()
        })
        .collect();
    Ok(ResponseErrors {
        eta: sd[0],
        p: sd[1..k - 1].to_vec(),
        p_tail: sd[k - 1],
    })
}
