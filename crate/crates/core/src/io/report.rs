//! Analysis tables and plot-ready point files.
//!
//! | file               | content                                         |
//! |--------------------|-------------------------------------------------|
//! | `curves.csv`       | `p_n` against bias current per wavelength and n |
//! | `thresholds.csv`   | threshold current against total energy          |
//! | `collapse.csv`     | points on the universal coordinate              |
//! | `gamma_scan.csv`   | collapse score over the slope grid              |
//! | `model_fits.csv`   | one row per detection model                     |
//! | `model_curves.csv` | fitted threshold lines over an energy grid      |
//! | `exclusions.csv`   | curves that gave no threshold                   |
//! | `summary.csv`      | scaling fit, collapse, zero-energy extrapolation |

use std::path::Path;

use super::table::{format_f64, format_opt, io_error, write_atomic, Table, TableWriter};
use crate::analysis::{
    AnalysisReport, CollapsedPoint, CurvePoint, Exclusion, ModelFit, ModelKind, ResponseCurve,
    ThresholdPoint,
};
use crate::error::Result;

pub const CURVES_FILE: &str = "curves.csv";
pub const THRESHOLDS_FILE: &str = "thresholds.csv";
pub const COLLAPSE_FILE: &str = "collapse.csv";
pub const GAMMA_SCAN_FILE: &str = "gamma_scan.csv";
pub const MODEL_FITS_FILE: &str = "model_fits.csv";
pub const MODEL_CURVES_FILE: &str = "model_curves.csv";
pub const EXCLUSIONS_FILE: &str = "exclusions.csv";
pub const SUMMARY_FILE: &str = "summary.csv";

const CURVES_HEADER: [&str; 5] = [
    "wavelength_nm",
    "photon_number",
    "bias_current_uA",
    "p",
    "sigma_p",
];

pub fn render_curves(curves: &[ResponseCurve]) -> Vec<u8> {
    let mut w = TableWriter::new(&CURVES_HEADER);
    for c in curves {
        for p in c.points() {
            w.row(&[
                format_f64(c.wavelength_nm),
                c.photon_number.to_string(),
                format_f64(p.bias_current_ua),
                format_f64(p.p),
                format_f64(p.sigma_p),
            ]);
        }
    }
    w.finish()
}

/// Consecutive rows sharing `(wavelength, n)` form one curve.
pub fn parse_curves(text: &str, source: &str) -> Result<Vec<ResponseCurve>> {
    let table = Table::parse(text, source)?;
    table.expect_header(&CURVES_HEADER)?;
    let mut groups: Vec<(f64, u32, Vec<CurvePoint>, u64)> = Vec::new();
    for row in table.rows() {
        let wl: f64 = row.parse("wavelength_nm")?;
        let n: u32 = row.parse("photon_number")?;
        let point = CurvePoint {
            bias_current_ua: row.parse("bias_current_uA")?,
            p: row.parse("p")?,
            sigma_p: row.parse("sigma_p")?,
        };
        match groups.last_mut() {
            Some(g) if g.0 == wl && g.1 == n => g.2.push(point),
            _ => groups.push((wl, n, vec![point], row.line)),
        }
    }
    groups
        .into_iter()
        .map(|(wl, n, points, line)| {
            ResponseCurve::new(wl, n, points)
                .map_err(|e| super::table::parse_error(source, line, &e.to_string()))
        })
        .collect()
}

const THRESHOLDS_HEADER: [&str; 5] = [
    "wavelength_nm",
    "photon_number",
    "energy_eV",
    "threshold_uA",
    "sigma_threshold_uA",
];

pub fn render_thresholds(points: &[ThresholdPoint]) -> Vec<u8> {
    let mut w = TableWriter::new(&THRESHOLDS_HEADER);
    for t in points {
        w.row(&[
            format_f64(t.wavelength_nm),
            t.photon_number.to_string(),
            format_f64(t.energy_ev),
            format_f64(t.current_ua),
            format_f64(t.sigma_current_ua),
        ]);
    }
    w.finish()
}

pub fn parse_thresholds(text: &str, source: &str) -> Result<Vec<ThresholdPoint>> {
    let table = Table::parse(text, source)?;
    table.expect_header(&THRESHOLDS_HEADER)?;
    table
        .rows()
        .map(|row| {
            Ok(ThresholdPoint {
                wavelength_nm: row.parse("wavelength_nm")?,
                photon_number: row.parse("photon_number")?,
                energy_ev: row.parse("energy_eV")?,
                current_ua: row.parse("threshold_uA")?,
                sigma_current_ua: row.parse("sigma_threshold_uA")?,
            })
        })
        .collect()
}

pub fn read_thresholds(path: &Path) -> Result<Vec<ThresholdPoint>> {
    let t = std::fs::read_to_string(path).map_err(|e| io_error(path, &e))?;
    parse_thresholds(&t, &path.display().to_string())
}

const COLLAPSE_HEADER: [&str; 6] = [
    "wavelength_nm",
    "photon_number",
    "bias_current_uA",
    "u_uA",
    "p",
    "sigma_p",
];

pub fn render_collapse(points: &[CollapsedPoint]) -> Vec<u8> {
    let mut w = TableWriter::new(&COLLAPSE_HEADER);
    for c in points {
        w.row(&[
            format_f64(c.wavelength_nm),
            c.photon_number.to_string(),
            format_f64(c.bias_current_ua),
            format_f64(c.u_ua),
            format_f64(c.p),
            format_f64(c.sigma_p),
        ]);
    }
    w.finish()
}

pub fn parse_collapse(text: &str, source: &str) -> Result<Vec<CollapsedPoint>> {
    let table = Table::parse(text, source)?;
    table.expect_header(&COLLAPSE_HEADER)?;
    table
        .rows()
        .map(|row| {
            Ok(CollapsedPoint {
                wavelength_nm: row.parse("wavelength_nm")?,
                photon_number: row.parse("photon_number")?,
                bias_current_ua: row.parse("bias_current_uA")?,
                u_ua: row.parse("u_uA")?,
                p: row.parse("p")?,
                sigma_p: row.parse("sigma_p")?,
            })
        })
        .collect()
}

const GAMMA_SCAN_HEADER: [&str; 2] = ["gamma_uA_per_eV", "score_dex"];

pub fn render_gamma_scan(scan: &[(f64, Option<f64>)]) -> Vec<u8> {
    let mut w = TableWriter::new(&GAMMA_SCAN_HEADER);
    for &(g, s) in scan {
        w.row(&[format_f64(g), format_opt(s)]);
    }
    w.finish()
}

/// Empty scores mark grid points where no bin could be scored.
pub fn parse_gamma_scan(text: &str, source: &str) -> Result<Vec<(f64, Option<f64>)>> {
    let table = Table::parse(text, source)?;
    table.expect_header(&GAMMA_SCAN_HEADER)?;
    table
        .rows()
        .map(|row| Ok((row.parse("gamma_uA_per_eV")?, row.parse_opt("score_dex")?)))
        .collect()
}

/// A model-fit row as stored; the fixed constants live in the config echo.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelFitRow {
    pub kind: ModelKind,
    pub parameters: [f64; 2],
    pub errors: [f64; 2],
    pub covariance_12: f64,
    pub chi2: f64,
    pub dof: usize,
    pub chi2_per_dof: f64,
    pub flag: String,
}

impl From<&ModelFit> for ModelFitRow {
    fn from(f: &ModelFit) -> Self {
        Self {
            kind: f.kind,
            parameters: f.parameters,
            errors: f.errors,
            covariance_12: f.covariance[0][1],
            chi2: f.chi2,
            dof: f.dof,
            chi2_per_dof: f.chi2_per_dof,
            flag: f.flag.clone().unwrap_or_default(),
        }
    }
}

const MODEL_FITS_HEADER: [&str; 12] = [
    "model",
    "param_1",
    "value_1",
    "sigma_1",
    "param_2",
    "value_2",
    "sigma_2",
    "covariance_12",
    "chi2",
    "dof",
    "chi2_per_dof",
    "flag",
];

pub fn render_model_fits(rows: &[ModelFitRow]) -> Vec<u8> {
    let mut w = TableWriter::new(&MODEL_FITS_HEADER);
    for r in rows {
        let [n1, n2] = r.kind.parameter_names();
        w.row(&[
            r.kind.name().to_string(),
            n1.to_string(),
            format_f64(r.parameters[0]),
            format_f64(r.errors[0]),
            n2.to_string(),
            format_f64(r.parameters[1]),
            format_f64(r.errors[1]),
            format_f64(r.covariance_12),
            format_f64(r.chi2),
            r.dof.to_string(),
            format_f64(r.chi2_per_dof),
            r.flag.clone(),
        ]);
    }
    w.finish()
}

pub fn parse_model_fits(text: &str, source: &str) -> Result<Vec<ModelFitRow>> {
    let table = Table::parse(text, source)?;
    table.expect_header(&MODEL_FITS_HEADER)?;
    table
        .rows()
        .map(|row| {
            let kind: ModelKind = row
                .text("model")?
                .parse()
                .map_err(|e: crate::error::Error| row.error(&e.to_string()))?;
            let names = kind.parameter_names();
            if row.text("param_1")? != names[0] || row.text("param_2")? != names[1] {
                return Err(row.error(&format!(
                    "parameters of {} must be {} and {}",
                    kind.name(),
                    names[0],
                    names[1]
                )));
            }
            Ok(ModelFitRow {
                kind,
                parameters: [row.parse("value_1")?, row.parse("value_2")?],
                errors: [row.parse("sigma_1")?, row.parse("sigma_2")?],
                covariance_12: row.parse("covariance_12")?,
                chi2: row.parse("chi2")?,
                dof: row.parse("dof")?,
                chi2_per_dof: row.parse("chi2_per_dof")?,
                flag: row.text("flag")?.to_string(),
            })
        })
        .collect()
}

/// Energies at which `model_curves.csv` samples each fitted line, eV.
pub fn model_curve_energies() -> Vec<f64> {
    (0..=60).map(|i| i as f64 * 0.05).collect()
}

/// Fitted threshold currents over [`model_curve_energies`]: the empirical
/// line first, then one column per model.
pub fn render_model_curves(report: &AnalysisReport) -> Vec<u8> {
    let mut header = vec!["energy_eV".to_string(), "scaling_line_uA".to_string()];
    header.extend(
        report
            .model_fits
            .iter()
            .map(|f| format!("{}_uA", f.kind.name())),
    );
    let mut w = TableWriter::new(&header);
    for e in model_curve_energies() {
        let mut f = vec![format_f64(e), format_f64(report.scaling.predict(e))];
        f.extend(report.model_fits.iter().map(|m| format_f64(m.predict(e))));
        w.row(&f);
    }
    w.finish()
}

/// A table whose every field is a number, keyed by its header.
#[derive(Debug, Clone, PartialEq)]
pub struct NumericTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

pub fn parse_numeric_table(text: &str, source: &str) -> Result<NumericTable> {
    let table = Table::parse(text, source)?;
    let header = table.header.clone();
    let rows = table
        .rows()
        .map(|row| {
            header
                .iter()
                .map(|h| row.parse::<f64>(h))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    Ok(NumericTable { header, rows })
}

const EXCLUSIONS_HEADER: [&str; 3] = ["wavelength_nm", "photon_number", "reason"];

pub fn render_exclusions(ex: &[Exclusion]) -> Vec<u8> {
    let mut w = TableWriter::new(&EXCLUSIONS_HEADER);
    for e in ex {
        w.row(&[
            format_f64(e.wavelength_nm),
            e.photon_number.to_string(),
            e.reason.clone(),
        ]);
    }
    w.finish()
}

pub fn parse_exclusions(text: &str, source: &str) -> Result<Vec<Exclusion>> {
    let table = Table::parse(text, source)?;
    table.expect_header(&EXCLUSIONS_HEADER)?;
    table
        .rows()
        .map(|row| {
            Ok(Exclusion {
                wavelength_nm: row.parse("wavelength_nm")?,
                photon_number: row.parse("photon_number")?,
                reason: row.text("reason")?.to_string(),
            })
        })
        .collect()
}

/// Scalar results of an analysis run.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisSummary {
    pub level: f64,
    pub gamma_ua_per_ev: f64,
    pub sigma_gamma_ua_per_ev: f64,
    pub intercept_ua: f64,
    pub sigma_intercept_ua: f64,
    pub covariance_gamma_intercept: f64,
    pub scaling_chi2: f64,
    pub scaling_dof: usize,
    pub collapse_score_dex: f64,
    pub collapse_decades: f64,
    pub collapse_scored_bins: usize,
    /// Argmin of the slope scan; `None` when no grid point could be scored.
    pub best_gamma_ua_per_ev: Option<f64>,
    pub dark_current_ua: f64,
    pub sigma_dark_current_ua: f64,
    pub critical_current_ua: f64,
    pub dark_ratio_to_critical: f64,
    pub dark_note: String,
}

impl AnalysisSummary {
    pub fn from_report(report: &AnalysisReport, level: f64) -> Self {
        Self {
            level,
            gamma_ua_per_ev: report.scaling.gamma_ua_per_ev,
            sigma_gamma_ua_per_ev: report.scaling.sigma_gamma(),
            intercept_ua: report.scaling.intercept_ua,
            sigma_intercept_ua: report.scaling.sigma_intercept(),
            covariance_gamma_intercept: report.scaling.covariance[0][1],
            scaling_chi2: report.scaling.chi2,
            scaling_dof: report.scaling.dof,
            collapse_score_dex: report.collapse.score,
            collapse_decades: report.collapse.decades,
            collapse_scored_bins: report.collapse.scored_bins,
            best_gamma_ua_per_ev: report.best_gamma,
            dark_current_ua: report.dark.current_ua,
            sigma_dark_current_ua: report.dark.sigma_ua,
            critical_current_ua: report.dark.critical_current_ua,
            dark_ratio_to_critical: report.dark.ratio_to_critical,
            dark_note: report.dark.note(),
        }
    }

    fn entries(&self) -> Vec<(&'static str, String)> {
        vec![
            ("level", format_f64(self.level)),
            ("gamma_uA_per_eV", format_f64(self.gamma_ua_per_ev)),
            (
                "sigma_gamma_uA_per_eV",
                format_f64(self.sigma_gamma_ua_per_ev),
            ),
            ("intercept_uA", format_f64(self.intercept_ua)),
            ("sigma_intercept_uA", format_f64(self.sigma_intercept_ua)),
            (
                "covariance_gamma_intercept",
                format_f64(self.covariance_gamma_intercept),
            ),
            ("scaling_chi2", format_f64(self.scaling_chi2)),
            ("scaling_dof", self.scaling_dof.to_string()),
            ("collapse_score_dex", format_f64(self.collapse_score_dex)),
            ("collapse_decades", format_f64(self.collapse_decades)),
            (
                "collapse_scored_bins",
                self.collapse_scored_bins.to_string(),
            ),
            (
                "best_gamma_uA_per_eV",
                format_opt(self.best_gamma_ua_per_ev),
            ),
            ("dark_current_uA", format_f64(self.dark_current_ua)),
            (
                "sigma_dark_current_uA",
                format_f64(self.sigma_dark_current_ua),
            ),
            ("critical_current_uA", format_f64(self.critical_current_ua)),
            (
                "dark_ratio_to_critical",
                format_f64(self.dark_ratio_to_critical),
            ),
            ("dark_note", self.dark_note.clone()),
        ]
    }
}

pub fn render_summary(s: &AnalysisSummary) -> Vec<u8> {
    let mut w = TableWriter::new(&["key", "value"]);
    for (k, v) in s.entries() {
        w.row(&[k.to_string(), v]);
    }
    w.finish()
}

pub fn parse_summary(text: &str, source: &str) -> Result<AnalysisSummary> {
    let table = Table::parse(text, source)?;
    table.expect_header(&["key", "value"])?;
    let mut map = std::collections::BTreeMap::new();
    for row in table.rows() {
        let key = row.text("key")?.to_string();
        if map
            .insert(key.clone(), (row.line, row.text("value")?.to_string()))
            .is_some()
        {
            return Err(row.error(&format!("duplicate key `{key}`")));
        }
    }
    let get = |k: &str| -> Result<&(u64, String)> {
        map.get(k)
            .ok_or_else(|| super::table::parse_error(source, 0, &format!("missing key `{k}`")))
    };
    fn num<T: std::str::FromStr>(source: &str, entry: &(u64, String), key: &str) -> Result<T> {
        entry.1.parse().map_err(|_| {
            super::table::parse_error(
                source,
                entry.0,
                &format!("`{key}` is not a number: `{}`", entry.1),
            )
        })
    }
    macro_rules! field {
        ($k:literal) => {
            num(source, get($k)?, $k)?
        };
    }
    let best = get("best_gamma_uA_per_eV")?;
    Ok(AnalysisSummary {
        level: field!("level"),
        gamma_ua_per_ev: field!("gamma_uA_per_eV"),
        sigma_gamma_ua_per_ev: field!("sigma_gamma_uA_per_eV"),
        intercept_ua: field!("intercept_uA"),
        sigma_intercept_ua: field!("sigma_intercept_uA"),
        covariance_gamma_intercept: field!("covariance_gamma_intercept"),
        scaling_chi2: field!("scaling_chi2"),
        scaling_dof: field!("scaling_dof"),
        collapse_score_dex: field!("collapse_score_dex"),
        collapse_decades: field!("collapse_decades"),
        collapse_scored_bins: field!("collapse_scored_bins"),
        best_gamma_ua_per_ev: if best.1.is_empty() {
            None
        } else {
            Some(num(source, best, "best_gamma_uA_per_eV")?)
        },
        dark_current_ua: field!("dark_current_uA"),
        sigma_dark_current_ua: field!("sigma_dark_current_uA"),
        critical_current_ua: field!("critical_current_uA"),
        dark_ratio_to_critical: field!("dark_ratio_to_critical"),
        dark_note: get("dark_note")?.1.clone(),
    })
}

pub fn read_summary(path: &Path) -> Result<AnalysisSummary> {
    let text = std::fs::read_to_string(path).map_err(|e| io_error(path, &e))?;
    parse_summary(&text, &path.display().to_string())
}

/// Writes every analysis table into `dir`.
pub fn write_report(dir: &Path, report: &AnalysisReport, level: f64) -> Result<()> {
    let fits: Vec<ModelFitRow> = report.model_fits.iter().map(ModelFitRow::from).collect();
    let files: [(&str, Vec<u8>); 8] = [
        (CURVES_FILE, render_curves(&report.curves)),
        (THRESHOLDS_FILE, render_thresholds(&report.thresholds)),
        (COLLAPSE_FILE, render_collapse(&report.collapse.points)),
        (GAMMA_SCAN_FILE, render_gamma_scan(&report.gamma_scan)),
        (MODEL_FITS_FILE, render_model_fits(&fits)),
        (MODEL_CURVES_FILE, render_model_curves(report)),
        (EXCLUSIONS_FILE, render_exclusions(&report.exclusions)),
        (
            SUMMARY_FILE,
            render_summary(&AnalysisSummary::from_report(report, level)),
        ),
    ];
    for (name, bytes) in files {
        write_atomic(&dir.join(name), &bytes)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thresholds_round_trip() {
        let pts = vec![ThresholdPoint {
            wavelength_nm: 1300.0,
            photon_number: 2,
            energy_ev: 1239.8419 * 2.0 / 1300.0,
            current_ua: 14.649_123_456_7,
            sigma_current_ua: 0.1,
        }];
        let text = String::from_utf8(render_thresholds(&pts)).unwrap();
        assert_eq!(parse_thresholds(&text, "t").unwrap(), pts);
    }

    #[test]
    fn gamma_scan_keeps_missing_scores() {
        let scan = vec![(-3.0, Some(0.071_234)), (-2.95, None), (-2.9, Some(0.05))];
        let text = String::from_utf8(render_gamma_scan(&scan)).unwrap();
        assert_eq!(parse_gamma_scan(&text, "g").unwrap(), scan);
    }

    #[test]
    fn exclusion_reasons_with_commas_survive() {
        let ex = vec![Exclusion {
            wavelength_nm: 1000.0,
            photon_number: 3,
            reason: "level 0.1 not bracketed, curve stays below".into(),
        }];
        let text = String::from_utf8(render_exclusions(&ex)).unwrap();
        assert_eq!(parse_exclusions(&text, "e").unwrap(), ex);
    }

    #[test]
    fn curves_regroup_by_series() {
        let mk = |wl, n, i0: f64| {
            ResponseCurve::new(
                wl,
                n,
                (0..4)
                    .map(|i| CurvePoint {
                        bias_current_ua: i0 + 0.5 * i as f64,
                        p: 1e-3 * (i + 1) as f64,
                        sigma_p: 1e-5,
                    })
                    .collect(),
            )
            .unwrap()
        };
        let curves = vec![
            mk(1000.0, 1, 12.0),
            mk(1000.0, 2, 12.0),
            mk(1500.0, 1, 13.0),
        ];
        let text = String::from_utf8(render_curves(&curves)).unwrap();
        assert_eq!(parse_curves(&text, "c").unwrap(), curves);
    }

    #[test]
    fn model_rows_round_trip() {
        let rows = vec![ModelFitRow {
            kind: ModelKind::Fluctuation,
            parameters: [0.0714, 2.8e-4],
            errors: [0.001, 1e-6],
            covariance_12: -3.3e-10,
            chi2: 4.2,
            dof: 4,
            chi2_per_dof: 1.05,
            flag: String::new(),
        }];
        let text = String::from_utf8(render_model_fits(&rows)).unwrap();
        assert_eq!(parse_model_fits(&text, "m").unwrap(), rows);
    }
}
