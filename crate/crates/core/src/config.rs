//! Run configuration: flat `section.key = value` lines.
//!
//! The text is TOML restricted to dotted keys, so `[section]` tables are
//! accepted as well. Unknown keys are rejected. [`RunConfig::echo`] writes
//! every key, including the analysis constants, in the same syntax.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::{
    AnalysisOptions, CollapseOptions, FluctuationConstants, ModelConstants, SigmaOverride,
};
use crate::error::{Error, Result};
use crate::simulator::{linear_grid, log_ladder, CampaignPlan, GroundTruthDetector};
use crate::tomography::{
    FitOptions, Parameterization, DEFAULT_ORDER_CANDIDATES, DEFAULT_RESAMPLES,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorSection {
    #[serde(rename = "gamma_uA_per_eV")]
    pub gamma_ua_per_ev: f64,
    #[serde(rename = "u0_uA")]
    pub u0_ua: f64,
    #[serde(rename = "width_uA")]
    pub width_ua: f64,
    pub p_sat: f64,
    pub eta: f64,
    #[serde(rename = "critical_current_uA")]
    pub critical_current_ua: f64,
    pub dark_rate_hz: f64,
}

impl Default for DetectorSection {
    fn default() -> Self {
        let d = GroundTruthDetector::default();
        Self {
            gamma_ua_per_ev: d.gamma_true,
            u0_ua: d.u0,
            width_ua: d.width,
            p_sat: d.p_sat,
            eta: d.eta_true,
            critical_current_ua: d.ic,
            dark_rate_hz: d.dark_rate_hz,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CampaignSection {
    pub wavelengths_nm: Vec<f64>,
    #[serde(rename = "bias_current_start_uA")]
    pub bias_current_start_ua: f64,
    #[serde(rename = "bias_current_stop_uA")]
    pub bias_current_stop_ua: f64,
    #[serde(rename = "bias_current_step_uA")]
    pub bias_current_step_ua: f64,
    pub photon_number_min: f64,
    pub photon_number_max: f64,
    pub photon_number_steps: usize,
    pub pulses_per_window: u64,
    pub window_s: f64,
    pub repeats: u32,
    pub seed: u64,
}

impl Default for CampaignSection {
    fn default() -> Self {
        Self {
            wavelengths_nm: vec![1000.0, 1300.0, 1500.0],
            bias_current_start_ua: 12.0,
            bias_current_stop_ua: 22.0,
            bias_current_step_ua: 0.5,
            photon_number_min: 1e1,
            photon_number_max: 1e7,
            photon_number_steps: 30,
            pulses_per_window: 1_000_000,
            window_s: 0.1,
            repeats: 10,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitSection {
    pub nmax_candidates: Vec<usize>,
    /// Zero keeps the inverse-Fisher errors.
    pub bootstrap_resamples: usize,
    /// One linear efficiency for all bias currents at a wavelength.
    pub shared_eta: bool,
    /// Force `p_1 <= p_2 <= .. <= p_tail`.
    pub monotone: bool,
}

impl Default for FitSection {
    fn default() -> Self {
        Self {
            nmax_candidates: DEFAULT_ORDER_CANDIDATES.to_vec(),
            bootstrap_resamples: DEFAULT_RESAMPLES,
            shared_eta: false,
            monotone: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisSection {
    pub level: f64,
    #[serde(rename = "min_sigma_uA")]
    pub min_sigma_ua: f64,
    /// `"wavelength_nm:n:sigma_uA"` entries.
    pub sigma_overrides: Vec<String>,
    #[serde(rename = "gamma_min_uA_per_eV")]
    pub gamma_min: f64,
    #[serde(rename = "gamma_max_uA_per_eV")]
    pub gamma_max: f64,
    #[serde(rename = "gamma_step_uA_per_eV")]
    pub gamma_step: f64,
    #[serde(rename = "collapse_bin_uA")]
    pub collapse_bin_ua: f64,
    pub collapse_p_min: f64,
    pub collapse_p_max: f64,
    pub wire_width_nm: f64,
    #[serde(rename = "critical_current_uA")]
    pub critical_current_ua: f64,
    #[serde(
        rename = "fluctuation_delta_eV",
        skip_serializing_if = "Option::is_none"
    )]
    pub fluctuation_delta_ev: Option<f64>,
    #[serde(rename = "fluctuation_i0_uA", skip_serializing_if = "Option::is_none")]
    pub fluctuation_i0_ua: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fluctuation_beta: Option<f64>,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        let a = AnalysisOptions::default();
        Self {
            level: a.level,
            min_sigma_ua: a.min_sigma_ua,
            sigma_overrides: Vec::new(),
            gamma_min: -4.0,
            gamma_max: -2.0,
            gamma_step: 0.05,
            collapse_bin_ua: a.collapse.bin_width_ua,
            collapse_p_min: a.collapse.p_range.0,
            collapse_p_max: a.collapse.p_range.1,
            wire_width_nm: a.constants.wire_width_nm,
            critical_current_ua: a.constants.critical_current_ua,
            fluctuation_delta_ev: None,
            fluctuation_i0_ua: None,
            fluctuation_beta: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: String,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: "out".into() }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub detector: DetectorSection,
    pub campaign: CampaignSection,
    pub fit: FitSection,
    pub analysis: AnalysisSection,
    pub output: OutputSection,
}

/// Parses one `"wavelength_nm:n:sigma_uA"` override.
pub fn parse_sigma_override(s: &str) -> Result<SigmaOverride> {
    let bad = || {
        Error::Config(format!(
            "sigma override {s:?} must read wavelength_nm:n:sigma_uA"
        ))
    };
    let parts: Vec<&str> = s.split(':').map(str::trim).collect();
    let [wl, n, sigma] = parts[..] else {
        return Err(bad());
    };
    let o = SigmaOverride {
        wavelength_nm: wl.parse().map_err(|_| bad())?,
        photon_number: n.parse().map_err(|_| bad())?,
        sigma_ua: sigma.parse().map_err(|_| bad())?,
    };
    if !(o.sigma_ua > 0.0 && o.sigma_ua.is_finite()) || o.photon_number == 0 {
        return Err(bad());
    }
    Ok(o)
}

/// TOML literal for a float that always reads back as the same float.
fn toml_float(v: f64) -> String {
    format!("{v:?}")
}

fn toml_floats(v: &[f64]) -> String {
    let items: Vec<String> = v.iter().map(|&x| toml_float(x)).collect();
    format!("[{}]", items.join(", "))
}

fn toml_string(s: &str) -> String {
    toml::Value::String(s.to_owned()).to_string()
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string().trim_end().to_owned()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.detector().validate()?;
        let bad = |m: String| Err(Error::Config(m));
        let c = &self.campaign;
        if c.wavelengths_nm.is_empty() || c.wavelengths_nm.iter().any(|w| !(*w > 0.0)) {
            return bad("campaign.wavelengths_nm must list positive wavelengths".into());
        }
        if self.bias_currents().is_empty() {
            return bad(format!(
                "campaign bias-current grid {}..{} step {} is empty",
                c.bias_current_start_ua, c.bias_current_stop_ua, c.bias_current_step_ua
            ));
        }
        if !(c.photon_number_min > 0.0 && c.photon_number_max >= c.photon_number_min)
            || c.photon_number_steps == 0
        {
            return bad("campaign photon-number ladder is empty".into());
        }
        self.campaign_plan().validate()?;
        if self.fit.nmax_candidates.is_empty() || self.fit.nmax_candidates.contains(&0) {
            return bad("fit.nmax_candidates must list orders >= 1".into());
        }
        if self.fit.bootstrap_resamples == 1 {
            return bad("fit.bootstrap_resamples must be 0 or at least 2".into());
        }
        let a = &self.analysis;
        if !(a.level > 0.0 && a.level < 1.0) {
            return bad(format!("analysis.level {} outside (0, 1)", a.level));
        }
        if self.gamma_grid().is_empty() {
            return bad("analysis gamma grid is empty".into());
        }
        if !(a.collapse_bin_ua > 0.0)
            || !(a.collapse_p_min > 0.0 && a.collapse_p_max > a.collapse_p_min)
        {
            return bad("analysis collapse bin or p window is invalid".into());
        }
        if !(a.min_sigma_ua >= 0.0 && a.wire_width_nm > 0.0 && a.critical_current_ua > 0.0) {
            return bad("analysis constants must be positive".into());
        }
        for s in &a.sigma_overrides {
            parse_sigma_override(s)?;
        }
        let given = [
            a.fluctuation_delta_ev,
            a.fluctuation_i0_ua,
            a.fluctuation_beta,
        ]
        .iter()
        .filter(|v| v.is_some())
        .count();
        if given != 0 && given != 3 {
            return bad(
                "analysis.fluctuation_delta_eV, fluctuation_i0_uA and fluctuation_beta go together"
                    .into(),
            );
        }
        Ok(())
    }

    pub fn detector(&self) -> GroundTruthDetector {
        let d = &self.detector;
        GroundTruthDetector {
            gamma_true: d.gamma_ua_per_ev,
            u0: d.u0_ua,
            width: d.width_ua,
            p_sat: d.p_sat,
            eta_true: d.eta,
            ic: d.critical_current_ua,
            dark_rate_hz: d.dark_rate_hz,
        }
    }

    pub fn bias_currents(&self) -> Vec<f64> {
        let c = &self.campaign;
        linear_grid(
            c.bias_current_start_ua,
            c.bias_current_stop_ua,
            c.bias_current_step_ua,
        )
    }

    pub fn campaign_plan(&self) -> CampaignPlan {
        let c = &self.campaign;
        CampaignPlan {
            wavelengths_nm: c.wavelengths_nm.clone(),
            bias_currents_ua: self.bias_currents(),
            mean_photon_numbers: log_ladder(
                c.photon_number_min,
                c.photon_number_max,
                c.photon_number_steps,
            ),
            pulses_per_window: c.pulses_per_window,
            window_s: c.window_s,
            repeats: c.repeats,
            seed: c.seed,
        }
    }

    pub fn fit_options(&self) -> FitOptions {
        FitOptions {
            parameterization: if self.fit.monotone {
                Parameterization::Monotone
            } else {
                Parameterization::Independent
            },
            ..FitOptions::default()
        }
    }

    pub fn gamma_grid(&self) -> Vec<f64> {
        let a = &self.analysis;
        linear_grid(a.gamma_min, a.gamma_max, a.gamma_step)
    }

    /// Fails when the fluctuation constants are missing: they are never
    /// filled in silently.
    pub fn analysis_options(&self) -> Result<AnalysisOptions> {
        let a = &self.analysis;
        let fluctuation =
            match (
                a.fluctuation_delta_ev,
                a.fluctuation_i0_ua,
                a.fluctuation_beta,
            ) {
                (Some(delta_ev), Some(i0_ua), Some(beta)) => FluctuationConstants {
                    delta_ev,
                    i0_ua,
                    beta,
                },
                _ => return Err(Error::Config(
                    "analysis needs analysis.fluctuation_delta_eV, analysis.fluctuation_i0_uA and \
                     analysis.fluctuation_beta"
                        .into(),
                )),
            };
        Ok(AnalysisOptions {
            level: a.level,
            min_sigma_ua: a.min_sigma_ua,
            sigma_overrides: a
                .sigma_overrides
                .iter()
                .map(|s| parse_sigma_override(s))
                .collect::<Result<_>>()?,
            collapse: CollapseOptions {
                bin_width_ua: a.collapse_bin_ua,
                p_range: (a.collapse_p_min, a.collapse_p_max),
            },
            gamma_grid: self.gamma_grid(),
            constants: ModelConstants {
                wire_width_nm: a.wire_width_nm,
                critical_current_ua: a.critical_current_ua,
                fluctuation: Some(fluctuation),
            },
        })
    }

    pub fn output_dir(&self) -> PathBuf {
        PathBuf::from(&self.output.dir)
    }

    /// Every setting as `section.key = value`, readable by [`Self::parse`].
    pub fn echo(&self) -> String {
        let d = &self.detector;
        let c = &self.campaign;
        let f = &self.fit;
        let a = &self.analysis;
        let mut lines: Vec<(String, String)> = vec![
            (
                "detector.gamma_uA_per_eV".into(),
                toml_float(d.gamma_ua_per_ev),
            ),
            ("detector.u0_uA".into(), toml_float(d.u0_ua)),
            ("detector.width_uA".into(), toml_float(d.width_ua)),
            ("detector.p_sat".into(), toml_float(d.p_sat)),
            ("detector.eta".into(), toml_float(d.eta)),
            (
                "detector.critical_current_uA".into(),
                toml_float(d.critical_current_ua),
            ),
            ("detector.dark_rate_hz".into(), toml_float(d.dark_rate_hz)),
            (
                "campaign.wavelengths_nm".into(),
                toml_floats(&c.wavelengths_nm),
            ),
            (
                "campaign.bias_current_start_uA".into(),
                toml_float(c.bias_current_start_ua),
            ),
            (
                "campaign.bias_current_stop_uA".into(),
                toml_float(c.bias_current_stop_ua),
            ),
            (
                "campaign.bias_current_step_uA".into(),
                toml_float(c.bias_current_step_ua),
            ),
            (
                "campaign.photon_number_min".into(),
                toml_float(c.photon_number_min),
            ),
            (
                "campaign.photon_number_max".into(),
                toml_float(c.photon_number_max),
            ),
            (
                "campaign.photon_number_steps".into(),
                c.photon_number_steps.to_string(),
            ),
            (
                "campaign.pulses_per_window".into(),
                c.pulses_per_window.to_string(),
            ),
            ("campaign.window_s".into(), toml_float(c.window_s)),
            ("campaign.repeats".into(), c.repeats.to_string()),
            ("campaign.seed".into(), c.seed.to_string()),
            (
                "fit.nmax_candidates".into(),
                format!(
                    "[{}]",
                    f.nmax_candidates
                        .iter()
                        .map(|n| n.to_string())
                        .collect::<Vec<_>>()
                        .join(", ")
                ),
            ),
            (
                "fit.bootstrap_resamples".into(),
                f.bootstrap_resamples.to_string(),
            ),
            ("fit.shared_eta".into(), f.shared_eta.to_string()),
            ("fit.monotone".into(), f.monotone.to_string()),
            ("analysis.level".into(), toml_float(a.level)),
            ("analysis.min_sigma_uA".into(), toml_float(a.min_sigma_ua)),
            (
                "analysis.sigma_overrides".into(),
                format!(
                    "[{}]",
                    a.sigma_overrides
                        .iter()
                        .map(|s| toml_string(s))
                        .collect::<Vec<_>>()
                        .join(", ")
                ),
            ),
            (
                "analysis.gamma_min_uA_per_eV".into(),
                toml_float(a.gamma_min),
            ),
            (
                "analysis.gamma_max_uA_per_eV".into(),
                toml_float(a.gamma_max),
            ),
            (
                "analysis.gamma_step_uA_per_eV".into(),
                toml_float(a.gamma_step),
            ),
            (
                "analysis.collapse_bin_uA".into(),
                toml_float(a.collapse_bin_ua),
            ),
            (
                "analysis.collapse_p_min".into(),
                toml_float(a.collapse_p_min),
            ),
            (
                "analysis.collapse_p_max".into(),
                toml_float(a.collapse_p_max),
            ),
            ("analysis.wire_width_nm".into(), toml_float(a.wire_width_nm)),
            (
                "analysis.critical_current_uA".into(),
                toml_float(a.critical_current_ua),
            ),
        ];
        for (k, v) in [
            ("analysis.fluctuation_delta_eV", a.fluctuation_delta_ev),
            ("analysis.fluctuation_i0_uA", a.fluctuation_i0_ua),
            ("analysis.fluctuation_beta", a.fluctuation_beta),
        ] {
            if let Some(v) = v {
                lines.push((k.into(), toml_float(v)));
            }
        }
        lines.push(("output.dir".into(), toml_string(&self.output.dir)));
        let mut out = String::new();
        for (k, v) in lines {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }
}

/// File name of the configuration echo written next to results.
pub const CONFIG_ECHO_FILE: &str = "config_echo.conf";

#[cfg(test)]
mod tests {
    use super::*;

    fn full() -> RunConfig {
        let mut c = RunConfig::default();
        c.analysis.fluctuation_delta_ev = Some(2e-3);
        c.analysis.fluctuation_i0_ua = Some(57.5);
        c.analysis.fluctuation_beta = Some(1.0);
        c.analysis.sigma_overrides = vec!["1500:2:0.3".into()];
        c.campaign.photon_number_min = 3.3e-7;
        c.output.dir = "runs/a \"quoted\" dir".into();
        c
    }

    #[test]
    fn echo_round_trips() {
        let c = full();
        let text = c.echo();
        assert!(text.contains("analysis.level = 0.1\n"));
        assert!(text.contains("analysis.fluctuation_i0_uA = 57.5\n"));
        assert_eq!(RunConfig::parse(&text).unwrap(), c);
        let d = RunConfig::default();
        assert_eq!(RunConfig::parse(&d.echo()).unwrap(), d);
    }

    #[test]
    fn defaults_and_partial_files() {
        let c = RunConfig::parse("campaign.seed = 9\nanalysis.level = 0.2\n").unwrap();
        assert_eq!(c.campaign.seed, 9);
        assert_eq!(c.analysis.level, 0.2);
        assert_eq!(c.bias_currents().len(), 21);
        let t = RunConfig::parse("[campaign]\nrepeats = 3\n").unwrap();
        assert_eq!(t.campaign.repeats, 3);
    }

    #[test]
    fn invalid_settings_are_config_errors() {
        for text in [
            "analysis.level = 1.5",
            "campaign.bias_current_start_uA = 30.0",
            "campaign.wavelengths_nm = []",
            "fit.nmax_candidates = []",
            "detector.bogus = 1.0",
            "analysis.sigma_overrides = [\"1500:2\"]",
            "analysis.fluctuation_beta = 1.0",
            "campaign.seed = \"x\"",
        ] {
            assert!(
                matches!(RunConfig::parse(text), Err(Error::Config(_))),
                "{text}"
            );
        }
    }

    #[test]
    fn fluctuation_constants_are_required_for_analysis() {
        assert!(matches!(
            RunConfig::default().analysis_options(),
            Err(Error::Config(_))
        ));
        let opts = full().analysis_options().unwrap();
        assert_eq!(opts.sigma_overrides[0].photon_number, 2);
        assert_eq!(opts.constants.fluctuation.unwrap().i0_ua, 57.5);
    }

    #[test]
    fn plan_follows_the_campaign_block() {
        let plan = RunConfig::default().campaign_plan();
        assert_eq!(plan.wavelengths_nm, vec![1000.0, 1300.0, 1500.0]);
        assert_eq!(plan.mean_photon_numbers.len(), 30);
        assert_eq!(plan.num_records(), 3 * 21 * 30 * 10);
    }
}
