//! Reconstruction of the linear efficiency and the multiphoton detection
//! probabilities from power sweeps of click counts.
//!
//! The fit maximizes the binomial likelihood of the counts with a damped
//! Gauss-Newton iteration on the Fisher information, started from five
//! deterministic guesses and from the best point of a profile-likelihood
//! scan over `eta`. Model order is chosen by AIC and uncertainties
//! come from a parametric bootstrap.

mod bootstrap;
mod data;
mod fit;
mod likelihood;
mod order;
mod profile;

pub use bootstrap::{bootstrap_errors, DEFAULT_RESAMPLES, MAX_FAILED_FRACTION};
pub use data::{SweepData, SweepRecord, MIN_DECADES, MIN_DISTINCT_POWERS};
pub use fit::{
    fit_response, fit_shared_eta, sweep_deviance, FitOptions, FitStatus, ReconstructionResult,
    ResponseErrors, NUM_STARTS,
};
pub use likelihood::Parameterization;
pub use order::{select_model_order, OrderSelection, AIC_MARGIN, DEFAULT_ORDER_CANDIDATES};
