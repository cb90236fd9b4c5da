//! Profile-likelihood scan over the linear efficiency.
//!
//! At fixed `eta` the click probability is linear in `(p_1..p_nmax, p_tail)`,
//! so the binomial log-likelihood is concave in them and has no spurious
//! local maxima. Scanning `ln eta` and solving the inner problem by
//! expectation-maximization yields a start inside the global basin.

use super::likelihood::Cell;
use crate::photonics::{pmf_unchecked, sf_unchecked};

/// Grid points per decade of `eta`.
const POINTS_PER_DECADE: f64 = 16.0;
/// Largest `eta N` at the lower end of the scan; below it every record is
/// in the linear regime and `eta` is not identifiable.
const MIN_PEAK_MEAN: f64 = 0.1;
const EM_ITERATIONS: usize = 200;

/// Poisson weights of one cell: `P(0)`, `P(1..=nmax)`, `P(n > nmax)`.
struct Weights {
    vacuum: f64,
    class: Vec<f64>,
}

fn weights(x: f64, nmax: usize) -> Weights {
    let mut class: Vec<f64> = (1..=nmax as u64).map(|n| pmf_unchecked(x, n)).collect();
    class.push(sf_unchecked(x, nmax as u64));
    Weights {
        vacuum: (-x).exp(),
        class,
    }
}

fn click_and_dark(w: &Weights, p: &[f64]) -> (f64, f64) {
    let r: f64 = w.class.iter().zip(p).map(|(a, b)| a * b).sum();
    let q: f64 = w.vacuum
        + w.class
            .iter()
            .zip(p)
            .map(|(a, b)| a * (1.0 - b))
            .sum::<f64>();
    (r, q)
}

fn log_likelihood(cells: &[Cell], ws: &[Weights], p: &[f64]) -> f64 {
    cells
        .iter()
        .zip(ws)
        .map(|(c, w)| {
            let (r, q) = click_and_dark(w, p);
            let mut ll = 0.0;
            if c.clicks > 0.0 {
                ll += c.clicks * r.max(1e-300).ln();
            }
            if c.pulses > c.clicks {
                ll += (c.pulses - c.clicks) * q.max(1e-300).ln();
            }
            ll
        })
        .sum()
}

/// Inner EM at fixed `eta`. The latent variable is the absorbed-photon
/// class of each pulse; the update is expected clicks over expected pulses
/// per class and never leaves `[0, 1]`.
fn em(cells: &[Cell], ws: &[Weights], mut p: Vec<f64>) -> Vec<f64> {
    let m = p.len();
    let mut num = vec![0.0; m];
    let mut den = vec![0.0; m];
    for _ in 0..EM_ITERATIONS {
        num.iter_mut().for_each(|v| *v = 0.0);
        den.iter_mut().for_each(|v| *v = 0.0);
        for (c, w) in cells.iter().zip(ws) {
            let (r, q) = click_and_dark(w, &p);
            let dark = c.pulses - c.clicks;
            for j in 0..m {
                let on = if r > 0.0 {
                    c.clicks * p[j] * w.class[j] / r
                } else {
                    0.0
                };
                let off = if q > 0.0 {
                    dark * (1.0 - p[j]) * w.class[j] / q
                } else {
                    0.0
                };
                num[j] += on;
                den[j] += on + off;
            }
        }
        for j in 0..m {
            if den[j] > 0.0 {
                p[j] = num[j] / den[j];
            }
        }
    }
    p
}

/// Best `(eta, [p_1..p_nmax, p_tail])` over a log grid of `eta`.
pub(crate) fn profile_start(cells: &[Cell], nmax: usize) -> Option<(f64, Vec<f64>)> {
    let peak = cells
        .iter()
        .map(|c| c.mean_photon_number)
        .fold(0.0f64, f64::max);
    if peak <= 0.0 {
        return None;
    }
    let lo = (MIN_PEAK_MEAN / peak).min(1.0).log10();
    let steps = ((-lo) * POINTS_PER_DECADE).ceil().max(1.0) as usize;
    let mut best: Option<(f64, f64, Vec<f64>)> = None;
    for i in 0..=steps {
        let eta = 10f64.powf(lo * (1.0 - i as f64 / steps as f64));
        let ws: Vec<Weights> = cells
            .iter()
            .map(|c| weights(eta * c.mean_photon_number, nmax))
            .collect();
        let p = em(cells, &ws, vec![0.5; nmax + 1]);
        let ll = log_likelihood(cells, &ws, &p);
        if best.as_ref().is_none_or(|b| ll > b.0) {
            best = Some((ll, eta, p));
        }
    }
    best.map(|(_, eta, p)| (eta, p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::photonics::{click_probability, DetectorResponse};

    fn cells_for(r: &DetectorResponse) -> Vec<Cell> {
        crate::simulator::log_ladder(1e1, 1e7, 30)
            .into_iter()
            .map(|n| {
                let pulses = 1e12;
                Cell {
                    mean_photon_number: n,
                    clicks: (click_probability(r, n).unwrap() * pulses).round(),
                    pulses,
                }
            })
            .collect()
    }

    #[test]
    fn em_never_decreases_likelihood() {
        let r = DetectorResponse::new(1e-3, vec![0.01, 0.4], 0.9).unwrap();
        let cells = cells_for(&r);
        let ws: Vec<Weights> = cells
            .iter()
            .map(|c| weights(1e-3 * c.mean_photon_number, 2))
            .collect();
        let mut p = vec![0.5; 3];
        let mut last = log_likelihood(&cells, &ws, &p);
        for _ in 0..5 {
            p = em(&cells, &ws, p);
            let ll = log_likelihood(&cells, &ws, &p);
            assert!(ll >= last - 1e-6 * last.abs());
            last = ll;
        }
    }

    #[test]
    fn scan_lands_near_the_true_efficiency() {
        let r = DetectorResponse::new(1e-3, vec![0.003, 0.08, 0.42], 0.5).unwrap();
        let (eta, p) = profile_start(&cells_for(&r), 3).unwrap();
        assert!((eta.log10() + 3.0).abs() < 0.1, "eta {eta}");
        assert!((p[3] - 0.5).abs() < 0.05);
    }
}
