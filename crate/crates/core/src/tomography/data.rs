use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Click counts from one counting window at one illumination setting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub wavelength_nm: f64,
    pub bias_current_ua: f64,
    /// Mean photon number per pulse at the detector input.
    pub mean_photon_number: f64,
    pub pulses: u64,
    pub clicks: u64,
    pub repeat_index: u32,
}

impl SweepRecord {
    pub fn validate(&self) -> Result<()> {
        if self.clicks > self.pulses {
            return Err(Error::InvalidSweep(format!(
                "{} clicks exceed {} pulses",
                self.clicks, self.pulses
            )));
        }
        if !self.mean_photon_number.is_finite() || self.mean_photon_number < 0.0 {
            return Err(Error::InvalidSweep(format!(
                "mean photon number {} is not a finite non-negative value",
                self.mean_photon_number
            )));
        }
        Ok(())
    }

    pub fn click_fraction(&self) -> f64 {
        if self.pulses == 0 {
            0.0
        } else {
            self.clicks as f64 / self.pulses as f64
        }
    }
}

/// A power sweep at fixed wavelength and bias current.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepData {
    pub records: Vec<SweepRecord>,
    pub source: String,
}

/// Minimum number of distinct non-zero photon numbers for a fit.
pub const MIN_DISTINCT_POWERS: usize = 8;
/// Minimum span of the power ladder, in decades.
pub const MIN_DECADES: f64 = 3.0;

impl SweepData {
    pub fn new(records: Vec<SweepRecord>, source: impl Into<String>) -> Self {
        Self {
            records,
            source: source.into(),
        }
    }

    pub fn wavelength_nm(&self) -> Option<f64> {
        self.records.first().map(|r| r.wavelength_nm)
    }

    pub fn bias_current_ua(&self) -> Option<f64> {
        self.records.first().map(|r| r.bias_current_ua)
    }

    pub fn total_clicks(&self) -> u64 {
        self.records.iter().map(|r| r.clicks).sum()
    }

    /// Sorted distinct positive photon numbers.
    pub fn distinct_powers(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self
            .records
            .iter()
            .map(|r| r.mean_photon_number)
            .filter(|&n| n > 0.0)
            .collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    }

    /// Checks record invariants, a shared setting, and the power ladder
    /// coverage a reconstruction needs.
    pub fn validate(&self) -> Result<()> {
        let first = self
            .records
            .first()
            .ok_or_else(|| Error::InvalidSweep(format!("{}: no records", self.source)))?;
        for r in &self.records {
            r.validate()?;
            if r.wavelength_nm != first.wavelength_nm || r.bias_current_ua != first.bias_current_ua
            {
                return Err(Error::InvalidSweep(format!(
                    "{}: records mix settings ({} nm, {} uA) and ({} nm, {} uA)",
                    self.source,
                    first.wavelength_nm,
                    first.bias_current_ua,
                    r.wavelength_nm,
                    r.bias_current_ua
                )));
            }
        }
        let powers = self.distinct_powers();
        if powers.len() < MIN_DISTINCT_POWERS {
            return Err(Error::InvalidSweep(format!(
                "{}: {} distinct photon numbers, need at least {MIN_DISTINCT_POWERS}",
                self.source,
                powers.len()
            )));
        }
        let decades = (powers[powers.len() - 1] / powers[0]).log10();
        if decades < MIN_DECADES {
            return Err(Error::InvalidSweep(format!(
                "{}: photon numbers span {decades:.2} decades, need at least {MIN_DECADES}",
                self.source
            )));
        }
        Ok(())
    }
}
