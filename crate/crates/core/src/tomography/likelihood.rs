//! Binomial likelihood of click counts under the forward model.
//!
//! Parameters live in an unconstrained space: `x[0] = ln eta` is shared by
//! every block, and each block (one sweep) owns `nmax + 1` logits for
//! `p_1..p_nmax, p_tail`. The objective is half the binomial deviance,
//! which differs from the negative log-likelihood by a data-only constant.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::data::SweepData;
use crate::optim::{Evaluation, Objective};
use crate::photonics::{pmf_unchecked, sf_unchecked};

/// How the per-photon-number probabilities map onto free parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Parameterization {
    /// Independent logits; `p_n` unconstrained in `n`.
    #[default]
    Independent,
    /// Cumulative increments: `1 - p_n = prod_{j<=n} (1 - s_j)` with
    /// `s_j = sigmoid(theta_j)`, forcing `p_1 <= p_2 <= ... <= p_tail`.
    Monotone,
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^t)` without overflow.
fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

pub(crate) fn logit(p: f64) -> f64 {
    let p = p.clamp(1e-12, 1.0 - 1e-12);
    (p / (1.0 - p)).ln()
}

/// Probabilities, their complements, and `d p_i / d theta_j`.
pub(crate) struct Probabilities {
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub jac: DMatrix<f64>,
}

impl Parameterization {
    pub(crate) fn probabilities(self, theta: &[f64]) -> Probabilities {
        let m = theta.len();
        let mut p = vec![0.0; m];
        let mut q = vec![0.0; m];
        let mut jac = DMatrix::zeros(m, m);
        match self {
            Parameterization::Independent => {
                for (i, &t) in theta.iter().enumerate() {
                    p[i] = sigmoid(t);
                    q[i] = sigmoid(-t);
                    jac[(i, i)] = p[i] * q[i];
                }
            }
            Parameterization::Monotone => {
                let mut log_q = 0.0;
                for i in 0..m {
                    log_q -= softplus(theta[i]);
                    q[i] = log_q.exp();
                    p[i] = -log_q.exp_m1();
                    for j in 0..=i {
                        jac[(i, j)] = q[i] * sigmoid(theta[j]);
                    }
                }
            }
        }
        Probabilities { p, q, jac }
    }

    /// Inverse map from probabilities (`p_1..p_nmax, p_tail`) to parameters.
    pub(crate) fn parameters(self, p: &[f64]) -> Vec<f64> {
        match self {
            Parameterization::Independent => p.iter().map(|&v| logit(v)).collect(),
            Parameterization::Monotone => {
                let mut prev_q = 1.0;
                p.iter()
                    .map(|&v| {
                        let q = (1.0 - v).clamp(1e-12, 1.0);
                        let s = (1.0 - q / prev_q).clamp(1e-9, 1.0 - 1e-9);
                        prev_q = q.min(prev_q);
                        logit(s)
                    })
                    .collect()
            }
        }
    }
}

/// Click and pulse totals at one photon number.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Cell {
    pub mean_photon_number: f64,
    pub clicks: f64,
    pub pulses: f64,
}

/// Aggregates repeats sharing a photon number. Records at zero photon
/// number carry no information on the parameters and are dropped.
pub(crate) fn aggregate(data: &SweepData) -> Vec<Cell> {
    let mut cells: Vec<Cell> = Vec::new();
    let mut recs: Vec<_> = data
        .records
        .iter()
        .filter(|r| r.mean_photon_number > 0.0)
        .collect();
    recs.sort_by(|a, b| a.mean_photon_number.total_cmp(&b.mean_photon_number));
    for r in recs {
        match cells.last_mut() {
            Some(c) if c.mean_photon_number == r.mean_photon_number => {
                c.clicks += r.clicks as f64;
                c.pulses += r.pulses as f64;
            }
            _ => cells.push(Cell {
                mean_photon_number: r.mean_photon_number,
                clicks: r.clicks as f64,
                pulses: r.pulses as f64,
            }),
        }
    }
    cells
}

/// Click probability, its complement, and derivatives at `x = eta N`.
pub(crate) struct PointModel {
    pub r: f64,
    pub q: f64,
    /// `dR/dx`.
    pub d_x: f64,
    /// `dR/dp_n` for `n = 1..=nmax`, then `dR/dp_tail`.
    pub d_p: Vec<f64>,
}

pub(crate) fn point_model(x: f64, probs: &Probabilities) -> PointModel {
    let m = probs.p.len() - 1; // nmax
    let pmf: Vec<f64> = (0..=m as u64).map(|n| pmf_unchecked(x, n)).collect();
    let tail = sf_unchecked(x, m as u64);
    let mut r = 0.0;
    let mut q = pmf[0];
    let mut d_x = 0.0;
    let mut d_p = Vec::with_capacity(m + 1);
    for n in 1..=m {
        let (pn, qn) = (probs.p[n - 1], probs.q[n - 1]);
        r += pn * pmf[n];
        q += qn * pmf[n];
        d_x += pn * (pmf[n - 1] - pmf[n]);
        d_p.push(pmf[n]);
    }
    r += probs.p[m] * tail;
    q += probs.q[m] * tail;
    d_x += probs.p[m] * pmf[m];
    d_p.push(tail);
    PointModel { r, q, d_x, d_p }
}

/// Half the binomial deviance of `clicks` out of `pulses` at probability
/// `r` (complement `q`).
pub(crate) fn half_deviance(clicks: f64, pulses: f64, r: f64, q: f64) -> f64 {
    let misses = pulses - clicks;
    let mut d = 0.0;
    if clicks > 0.0 {
        d += clicks * ((clicks / pulses).ln() - r.ln());
    }
    if misses > 0.0 {
        d += misses * ((misses / pulses).ln() - q.ln());
    }
    d
}

pub(crate) struct Block {
    pub cells: Vec<Cell>,
    pub nmax: usize,
    /// Index of `theta_1` in the parameter vector.
    pub offset: usize,
}

impl Block {
    pub fn width(&self) -> usize {
        self.nmax + 1
    }
}

pub(crate) struct BinomialObjective {
    pub blocks: Vec<Block>,
    pub parameterization: Parameterization,
}

impl BinomialObjective {
    pub fn new(sweeps: Vec<(Vec<Cell>, usize)>, parameterization: Parameterization) -> Self {
        let mut offset = 1;
        let blocks = sweeps
            .into_iter()
            .map(|(cells, nmax)| {
                let b = Block {
                    cells,
                    nmax,
                    offset,
                };
                offset += nmax + 1;
                b
            })
            .collect();
        Self {
            blocks,
            parameterization,
        }
    }

    pub fn block_probabilities(&self, block: &Block, x: &DVector<f64>) -> Probabilities {
        let theta = &x.as_slice()[block.offset..block.offset + block.width()];
        self.parameterization.probabilities(theta)
    }
}

impl Objective for BinomialObjective {
    fn dim(&self) -> usize {
        1 + self.blocks.iter().map(Block::width).sum::<usize>()
    }

    fn evaluate(&self, x: &DVector<f64>) -> Option<Evaluation> {
        let dim = self.dim();
        let eta = x[0].exp();
        if !eta.is_finite() {
            return None;
        }
        let mut value = 0.0;
        let mut gradient = DVector::zeros(dim);
        let mut curvature = DMatrix::zeros(dim, dim);
        for block in &self.blocks {
            let probs = self.block_probabilities(block, x);
            let w = block.width();
            // Local gradient layout: [zeta, theta_1..theta_nmax, theta_tail].
            let mut local = vec![0.0; w + 1];
            let mut idx = Vec::with_capacity(w + 1);
            idx.push(0);
            idx.extend(block.offset..block.offset + w);
            for cell in &block.cells {
                let xm = eta * cell.mean_photon_number;
                let pm = point_model(xm, &probs);
                let r = pm.r.max(1e-300);
                let q = pm.q.max(1e-300);
                value += half_deviance(cell.clicks, cell.pulses, r, q);
                let misses = cell.pulses - cell.clicks;
                let d_value_d_r = -cell.clicks / r + misses / q;
                let fisher = cell.pulses / (r * q);
                local[0] = xm * pm.d_x;
                for j in 0..w {
                    local[j + 1] = (0..w).map(|i| pm.d_p[i] * probs.jac[(i, j)]).sum();
                }
                for a in 0..=w {
                    gradient[idx[a]] += d_value_d_r * local[a];
                    for b in 0..=w {
                        curvature[(idx[a], idx[b])] += fisher * local[a] * local[b];
                    }
                }
            }
        }
        if !value.is_finite() {
            return None;
        }
        Some(Evaluation {
            value,
            gradient,
            curvature,
        })
    }

    fn value(&self, x: &DVector<f64>) -> Option<f64> {
        let eta = x[0].exp();
        if !eta.is_finite() {
            return None;
        }
        let mut value = 0.0;
        for block in &self.blocks {
            let probs = self.block_probabilities(block, x);
            for cell in &block.cells {
                let pm = point_model(eta * cell.mean_photon_number, &probs);
                value +=
                    half_deviance(cell.clicks, cell.pulses, pm.r.max(1e-300), pm.q.max(1e-300));
            }
        }
        value.is_finite().then_some(value)
    }
}
