//! Per-sweep split of the fitted click probability into photon-number
//! contributions, next to the observed click fraction.

use std::path::Path;

use super::table::{format_f64, io_error, write_atomic, Table, TableWriter};
use crate::error::Result;
use crate::photonics::{click_probability, contribution_decomposition, DetectorResponse};
use crate::tomography::SweepData;

#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionRow {
    pub mean_photon_number: f64,
    /// Pooled click fraction over the repeats at this photon number.
    pub r_observed: f64,
    pub r_fit: f64,
    /// `C_1..C_nmax`.
    pub contributions: Vec<f64>,
    pub tail: f64,
}

pub fn decomposition_file_name(wavelength_nm: f64, bias_current_ua: f64) -> String {
    format!(
        "decomposition_{}nm_{}uA.csv",
        format_f64(wavelength_nm),
        format_f64(bias_current_ua)
    )
}

/// One row per distinct non-zero photon number of the sweep, ascending.
pub fn decompose_sweep(
    data: &SweepData,
    response: &DetectorResponse,
) -> Result<Vec<DecompositionRow>> {
    let mut out = Vec::new();
    for n in data.distinct_powers() {
        let (clicks, pulses) = data
            .records
            .iter()
            .filter(|r| r.mean_photon_number == n)
            .fold((0u64, 0u64), |(c, p), r| (c + r.clicks, p + r.pulses));
        let parts = contribution_decomposition(response, n)?;
        let (tail, orders) = parts.split_last().expect("tail term is always present");
        out.push(DecompositionRow {
            mean_photon_number: n,
            r_observed: if pulses > 0 {
                clicks as f64 / pulses as f64
            } else {
                0.0
            },
            r_fit: click_probability(response, n)?,
            contributions: orders.iter().map(|c| c.value).collect(),
            tail: tail.value,
        });
    }
    Ok(out)
}

fn header(nmax: usize) -> Vec<String> {
    let mut h = vec![
        "mean_photon_number".to_string(),
        "r_obs".into(),
        "r_fit".into(),
    ];
    h.extend((1..=nmax).map(|n| format!("c_{n}")));
    h.push("c_tail".into());
    h
}

pub fn render_decomposition(rows: &[DecompositionRow]) -> Vec<u8> {
    let nmax = rows.first().map(|r| r.contributions.len()).unwrap_or(1);
    let mut w = TableWriter::new(&header(nmax));
    for r in rows {
        let mut f = vec![
            format_f64(r.mean_photon_number),
            format_f64(r.r_observed),
            format_f64(r.r_fit),
        ];
        f.extend(r.contributions.iter().map(|&c| format_f64(c)));
        f.push(format_f64(r.tail));
        w.row(&f);
    }
    w.finish()
}

pub fn parse_decomposition(text: &str, source: &str) -> Result<Vec<DecompositionRow>> {
    let table = Table::parse(text, source)?;
    let mut nmax = 0;
    while table.has_column(&format!("c_{}", nmax + 1)) {
        nmax += 1;
    }
    table.expect_header(&header(nmax))?;
    table
        .rows()
        .map(|row| {
            Ok(DecompositionRow {
                mean_photon_number: row.parse("mean_photon_number")?,
                r_observed: row.parse("r_obs")?,
                r_fit: row.parse("r_fit")?,
                contributions: (1..=nmax)
                    .map(|n| row.parse(&format!("c_{n}")))
                    .collect::<Result<_>>()?,
                tail: row.parse("c_tail")?,
            })
        })
        .collect()
}

pub fn read_decomposition(path: &Path) -> Result<Vec<DecompositionRow>> {
    let text = std::fs::read_to_string(path).map_err(|e| io_error(path, &e))?;
    parse_decomposition(&text, &path.display().to_string())
}

pub fn write_decomposition(path: &Path, rows: &[DecompositionRow]) -> Result<()> {
    write_atomic(path, &render_decomposition(rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tomography::SweepRecord;

    #[test]
    fn columns_sum_to_fit_and_round_trip() {
        let response = DetectorResponse::new(1e-3, vec![0.01, 0.3], 0.8).unwrap();
        let records = [1e2, 1e3, 1e4, 1e5]
            .iter()
            .flat_map(|&n| {
                (0..2).map(move |k| SweepRecord {
                    wavelength_nm: 1500.0,
                    bias_current_ua: 16.0,
                    mean_photon_number: n,
                    pulses: 1000,
                    clicks: 10 + k,
                    repeat_index: k as u32,
                })
            })
            .collect();
        let data = SweepData::new(records, "m");
        let rows = decompose_sweep(&data, &response).unwrap();
        assert_eq!(rows.len(), 4);
        assert_eq!(rows[0].r_observed, 21.0 / 2000.0);
        for r in &rows {
            let sum: f64 = r.contributions.iter().sum::<f64>() + r.tail;
            assert!((sum - r.r_fit).abs() < 1e-12);
        }
        let text = String::from_utf8(render_decomposition(&rows)).unwrap();
        assert!(text.starts_with("mean_photon_number,r_obs,r_fit,c_1,c_2,c_tail\n"));
        assert_eq!(parse_decomposition(&text, "d").unwrap(), rows);
    }
}
