//! Detector tomography for nanowire superconducting single-photon detectors.
//!
//! * [`photonics`]: Poisson photon statistics and the click-probability model.
//! * [`tomography`]: maximum-likelihood reconstruction of `eta` and `p_n`.
//! * [`simulator`]: synthetic campaigns from a universal-curve detector.
//! * [`analysis`]: thresholds, scaling law, collapse and model fits.
//! * [`io`] and [`config`]: file formats and run configuration.

// `!(x > 0.0)` style checks reject NaN together with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod config;
pub mod error;
pub mod io;
pub mod optim;
pub mod photonics;
pub mod rng;
pub mod selftest;
pub mod simulator;
pub mod tomography;

pub use error::{Error, Result};
pub use photonics::{
    click_probability, contribution_decomposition, DetectorResponse, PhotonEnergy,
};
pub use tomography::{ReconstructionResult, SweepData, SweepRecord};
