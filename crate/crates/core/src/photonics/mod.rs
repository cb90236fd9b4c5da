//! Coherent-state photon statistics and the click-probability forward model.
//!
//! All functions here are pure and thread-safe.

mod poisson;
mod response;

pub use poisson::{poisson_cdf, poisson_pmf, poisson_sf, truncation_order};
pub use response::{
    click_probability, contribution_decomposition, Contribution, ContributionOrder,
    DetectorResponse, PhotonEnergy, HC_EV_NM,
};

pub(crate) use poisson::{pmf_unchecked, sf_unchecked};
