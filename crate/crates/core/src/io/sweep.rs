//! Sweep files: one power sweep per file, one counting window per row.

use std::path::{Path, PathBuf};

use super::table::{format_f64, io_error, write_atomic, Table, TableWriter};
use crate::error::{Error, Result};
use crate::tomography::{SweepData, SweepRecord};

pub const SWEEP_HEADER: [&str; 6] = [
    "wavelength_nm",
    "bias_current_uA",
    "mean_photon_number",
    "pulses",
    "clicks",
    "repeat_index",
];

/// Canonical file name of the sweep at one setting.
pub fn sweep_file_name(wavelength_nm: f64, bias_current_ua: f64) -> String {
    format!(
        "sweep_{}nm_{}uA.csv",
        format_f64(wavelength_nm),
        format_f64(bias_current_ua)
    )
}

pub fn render_sweep(data: &SweepData) -> Vec<u8> {
    let mut w = TableWriter::new(&SWEEP_HEADER);
    for r in &data.records {
        w.row(&[
            format_f64(r.wavelength_nm),
            format_f64(r.bias_current_ua),
            format_f64(r.mean_photon_number),
            r.pulses.to_string(),
            r.clicks.to_string(),
            r.repeat_index.to_string(),
        ]);
    }
    w.finish()
}

/// Parses sweep text. Every row is checked on its own (clicks within
/// pulses, finite non-negative photon number); a file without data rows
/// is rejected.
pub fn parse_sweep(text: &str, source: &str) -> Result<SweepData> {
    let table = Table::parse(text, source)?;
    table.expect_header(&SWEEP_HEADER)?;
    if table.is_empty() {
        return Err(super::table::parse_error(
            source,
            2,
            "sweep file has no data rows",
        ));
    }
    let mut records = Vec::new();
    for row in table.rows() {
        let rec = SweepRecord {
            wavelength_nm: row.parse("wavelength_nm")?,
            bias_current_ua: row.parse("bias_current_uA")?,
            mean_photon_number: row.parse("mean_photon_number")?,
            pulses: row.parse("pulses")?,
            clicks: row.parse("clicks")?,
            repeat_index: row.parse("repeat_index")?,
        };
        rec.validate().map_err(|e| row.error(&e.to_string()))?;
        records.push(rec);
    }
    Ok(SweepData::new(records, source))
}

pub fn read_sweep(path: &Path) -> Result<SweepData> {
    let text = std::fs::read_to_string(path).map_err(|e| io_error(path, &e))?;
    parse_sweep(&text, &path.display().to_string())
}

/// Writes the sweep under its canonical name in `dir` and returns the path.
pub fn write_sweep(dir: &Path, data: &SweepData) -> Result<PathBuf> {
    let (Some(wl), Some(ib)) = (data.wavelength_nm(), data.bias_current_ua()) else {
        return Err(Error::InvalidSweep("cannot name an empty sweep".into()));
    };
    let path = dir.join(sweep_file_name(wl, ib));
    write_atomic(&path, &render_sweep(data))?;
    Ok(path)
}

/// Sweep files named by [`sweep_file_name`] in `dir`, sorted by name.
pub fn list_sweep_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|e| io_error(dir, &e))?;
    let mut out = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| io_error(dir, &e))?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
        if name.starts_with("sweep_") && name.ends_with(".csv") {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> SweepData {
        let records = (0..3)
            .map(|i| SweepRecord {
                wavelength_nm: 1500.0,
                bias_current_ua: 15.5,
                mean_photon_number: 0.1 * 3f64.powi(i),
                pulses: 1_000_000,
                clicks: 17 * i as u64,
                repeat_index: i as u32,
            })
            .collect();
        SweepData::new(records, "mem")
    }

    #[test]
    fn round_trip_is_lossless() {
        let data = sample();
        let text = String::from_utf8(render_sweep(&data)).unwrap();
        assert!(text.starts_with(
            "wavelength_nm,bias_current_uA,mean_photon_number,pulses,clicks,repeat_index\n"
        ));
        let back = parse_sweep(&text, "mem").unwrap();
        assert_eq!(back.records, data.records);
    }

    #[test]
    fn malformed_row_reports_its_line() {
        let text = "wavelength_nm,bias_current_uA,mean_photon_number,pulses,clicks,repeat_index\n\
                    1500,15,1.0,100,3,0\n\
                    1500,15,2.0,100,many,0\n";
        match parse_sweep(text, "bad.csv") {
            Err(Error::Parse {
                line, source_name, ..
            }) => {
                assert_eq!(line, 3);
                assert_eq!(source_name, "bad.csv");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn clicks_above_pulses_is_a_parse_error() {
        let text = "wavelength_nm,bias_current_uA,mean_photon_number,pulses,clicks,repeat_index\n\
                    1500,15,1.0,100,300,0\n";
        assert!(matches!(
            parse_sweep(text, "x"),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn empty_or_header_only_files_are_rejected() {
        assert!(matches!(parse_sweep("", "e"), Err(Error::Parse { .. })));
        let header_only = format!("{}\n", SWEEP_HEADER.join(","));
        assert!(matches!(
            parse_sweep(&header_only, "h"),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn unit_drift_in_header_is_rejected() {
        let text = "wavelength_nm,bias_current_mA,mean_photon_number,pulses,clicks,repeat_index\n\
                    1500,0.015,1.0,100,3,0\n";
        assert!(matches!(
            parse_sweep(text, "u"),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn file_names_encode_the_setting() {
        assert_eq!(sweep_file_name(1500.0, 15.5), "sweep_1500nm_15.5uA.csv");
    }
}
