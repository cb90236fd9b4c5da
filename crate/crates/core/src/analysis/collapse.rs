use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::curves::ResponseCurve;
use crate::error::{Error, Result};

pub const DEFAULT_BIN_WIDTH_UA: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollapseOptions {
    /// Width of the bins on the universal coordinate, µA.
    pub bin_width_ua: f64,
    /// Only points with `lo <= p <= hi` enter.
    pub p_range: (f64, f64),
}

impl Default for CollapseOptions {
    fn default() -> Self {
        Self {
            bin_width_ua: DEFAULT_BIN_WIDTH_UA,
            p_range: (1e-4, 0.3),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollapsedPoint {
    pub wavelength_nm: f64,
    pub photon_number: u32,
    pub bias_current_ua: f64,
    /// `I_b - gamma E`, µA.
    pub u_ua: f64,
    pub p: f64,
    pub sigma_p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Collapse {
    pub gamma_ua_per_ev: f64,
    pub points: Vec<CollapsedPoint>,
    /// RMS over scored bins of the spread of `log10 p`, in dex.
    pub score: f64,
    pub scored_bins: usize,
    /// Decades of `p` covered by points in scored bins.
    pub decades: f64,
}

/// Maps every curve point to the universal coordinate `u = I_b - gamma E`
/// and scores the overlap.
///
/// Points are binned on `u`; a bin is scored when it holds points from at
/// least two `(wavelength, n)` series, and its score is the sample standard
/// deviation of `log10 p` over all its points.
pub fn collapse(curves: &[ResponseCurve], gamma: f64, opts: &CollapseOptions) -> Result<Collapse> {
    if !gamma.is_finite() {
        return Err(Error::Domain(format!("gamma must be finite, got {gamma}")));
    }
    if !(opts.bin_width_ua > 0.0) {
        return Err(Error::Domain("bin width must be positive".into()));
    }
    let (lo, hi) = opts.p_range;
    let mut points = Vec::new();
    for c in curves {
        let e = c.energy_ev();
        for p in c.points() {
            if p.p > 0.0 && p.p >= lo && p.p <= hi {
                points.push(CollapsedPoint {
                    wavelength_nm: c.wavelength_nm,
                    photon_number: c.photon_number,
                    bias_current_ua: p.bias_current_ua,
                    u_ua: p.bias_current_ua - gamma * e,
                    p: p.p,
                    sigma_p: p.sigma_p,
                });
            }
        }
    }

    let mut bins: BTreeMap<i64, Vec<&CollapsedPoint>> = BTreeMap::new();
    for p in &points {
        bins.entry((p.u_ua / opts.bin_width_ua).floor() as i64)
            .or_default()
            .push(p);
    }
    let mut sum_sq = 0.0;
    let mut scored = 0usize;
    let (mut min_lp, mut max_lp) = (f64::INFINITY, f64::NEG_INFINITY);
    for members in bins.values() {
        let mut series: Vec<(u64, u32)> = members
            .iter()
            .map(|p| (p.wavelength_nm.to_bits(), p.photon_number))
            .collect();
        series.sort_unstable();
        series.dedup();
        if series.len() < 2 {
            continue;
        }
        let lp: Vec<f64> = members.iter().map(|p| p.p.log10()).collect();
        let n = lp.len() as f64;
        let mean = lp.iter().sum::<f64>() / n;
        let var = lp.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        sum_sq += var;
        scored += 1;
        for v in lp {
            min_lp = min_lp.min(v);
            max_lp = max_lp.max(v);
        }
    }
    if scored == 0 {
        return Err(Error::UndefinedScore);
    }
    points.sort_by(|a, b| a.u_ua.total_cmp(&b.u_ua));
    Ok(Collapse {
        gamma_ua_per_ev: gamma,
        points,
        score: (sum_sq / scored as f64).sqrt(),
        scored_bins: scored,
        decades: max_lp - min_lp,
    })
}

/// Collapse score on a grid of slopes; bins that cannot be scored give
/// `None`.
pub fn scan_gamma(
    curves: &[ResponseCurve],
    gammas: &[f64],
    opts: &CollapseOptions,
) -> Vec<(f64, Option<f64>)> {
    gammas
        .iter()
        .map(|&g| (g, collapse(curves, g, opts).ok().map(|c| c.score)))
        .collect()
}

/// Slope with the lowest score, ties resolved toward the first grid entry.
pub fn best_gamma(scan: &[(f64, Option<f64>)]) -> Option<f64> {
    scan.iter()
        .filter_map(|&(g, s)| s.map(|s| (g, s)))
        .fold(None, |best: Option<(f64, f64)>, (g, s)| match best {
            Some((_, bs)) if bs <= s => best,
            _ => Some((g, s)),
        })
        .map(|(g, _)| g)
}
