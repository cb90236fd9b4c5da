//! Response tables: one row per reconstructed `(wavelength, bias current)`.

use std::path::Path;

use nalgebra::DMatrix;

use super::table::{format_f64, write_atomic, Table, TableWriter};
use crate::error::Result;
use crate::photonics::DetectorResponse;
use crate::tomography::{FitStatus, Parameterization, ReconstructionResult, ResponseErrors};

/// Origin of the uncertainties in a response row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorSource {
    Bootstrap,
    /// Inverse Fisher information.
    Asymptotic,
    /// No-signal fits carry no uncertainty.
    None,
}

impl ErrorSource {
    fn as_str(self) -> &'static str {
        match self {
            ErrorSource::Bootstrap => "bootstrap",
            ErrorSource::Asymptotic => "asymptotic",
            ErrorSource::None => "none",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "bootstrap" => Some(ErrorSource::Bootstrap),
            "asymptotic" => Some(ErrorSource::Asymptotic),
            "none" => Some(ErrorSource::None),
            _ => None,
        }
    }
}

fn status_str(s: FitStatus) -> &'static str {
    match s {
        FitStatus::Converged => "converged",
        FitStatus::NoSignal => "no-signal",
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResponseRow {
    pub wavelength_nm: f64,
    pub bias_current_ua: f64,
    pub status: FitStatus,
    pub response: DetectorResponse,
    pub errors: ResponseErrors,
    pub error_source: ErrorSource,
    pub deviance: f64,
    pub dof: usize,
    pub deviance_per_dof: f64,
}

impl ResponseRow {
    pub fn from_result(r: &ReconstructionResult) -> Self {
        let (errors, error_source) = match (&r.standard_errors, r.status) {
            (_, FitStatus::NoSignal) => (r.asymptotic_errors(), ErrorSource::None),
            (Some(e), _) => (e.clone(), ErrorSource::Bootstrap),
            (None, _) => (r.asymptotic_errors(), ErrorSource::Asymptotic),
        };
        Self {
            wavelength_nm: r.wavelength_nm,
            bias_current_ua: r.bias_current_ua,
            status: r.status,
            response: r.response.clone(),
            errors,
            error_source,
            deviance: r.deviance,
            dof: r.dof,
            deviance_per_dof: r.deviance_per_dof,
        }
    }

    /// A reconstruction carrying this row's values, with the row's errors
    /// as its standard errors. The covariance is not stored in the table
    /// and comes back as zeros.
    pub fn to_result(&self) -> ReconstructionResult {
        let parameterization = Parameterization::Independent;
        let mut probs = self.response.p().to_vec();
        probs.push(self.response.p_tail());
        let mut parameters = vec![self.response.eta().ln()];
        parameters.extend(probs.iter().map(|&p| logit_or_inf(p)));
        let k = parameters.len();
        ReconstructionResult {
            wavelength_nm: self.wavelength_nm,
            bias_current_ua: self.bias_current_ua,
            response: self.response.clone(),
            status: self.status,
            parameterization,
            parameters,
            covariance: DMatrix::zeros(k, k),
            standard_errors: (self.error_source != ErrorSource::None).then(|| self.errors.clone()),
            deviance: self.deviance,
            dof: self.dof,
            deviance_per_dof: self.deviance_per_dof,
        }
    }
}

fn logit_or_inf(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn header(max_order: usize) -> Vec<String> {
    let mut h: Vec<String> = [
        "wavelength_nm",
        "bias_current_uA",
        "nmax",
        "status",
        "eta",
        "sigma_eta",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    for n in 1..=max_order {
        h.push(format!("p_{n}"));
        h.push(format!("sigma_p_{n}"));
    }
    for s in [
        "p_tail",
        "sigma_p_tail",
        "deviance",
        "dof",
        "deviance_per_dof",
        "error_source",
    ] {
        h.push(s.to_string());
    }
    h
}

/// Renders rows; `p_n` columns run to the largest order present, and
/// orders above a row's own `nmax` are left empty.
pub fn render_responses(rows: &[ResponseRow]) -> Vec<u8> {
    let max_order = rows.iter().map(|r| r.response.nmax()).max().unwrap_or(1);
    let mut w = TableWriter::new(&header(max_order));
    for r in rows {
        let mut f = vec![
            format_f64(r.wavelength_nm),
            format_f64(r.bias_current_ua),
            r.response.nmax().to_string(),
            status_str(r.status).to_string(),
            format_f64(r.response.eta()),
            format_f64(r.errors.eta),
        ];
        for n in 0..max_order {
            match (r.response.p().get(n), r.errors.p.get(n)) {
                (Some(&p), Some(&s)) => {
                    f.push(format_f64(p));
                    f.push(format_f64(s));
                }
                _ => {
                    f.push(String::new());
                    f.push(String::new());
                }
            }
        }
        f.push(format_f64(r.response.p_tail()));
        f.push(format_f64(r.errors.p_tail));
        f.push(format_f64(r.deviance));
        f.push(r.dof.to_string());
        f.push(format_f64(r.deviance_per_dof));
        f.push(r.error_source.as_str().to_string());
        w.row(&f);
    }
    w.finish()
}

pub fn parse_responses(text: &str, source: &str) -> Result<Vec<ResponseRow>> {
    let table = Table::parse(text, source)?;
    let mut max_order = 0;
    while table.has_column(&format!("p_{}", max_order + 1)) {
        max_order += 1;
    }
    table.expect_header(&header(max_order.max(1)))?;
    let mut rows = Vec::new();
    for row in table.rows() {
        let nmax: usize = row.parse("nmax")?;
        if nmax == 0 || nmax > max_order {
            return Err(row.error(&format!("nmax {nmax} outside 1..={max_order}")));
        }
        let status = match row.text("status")? {
            "converged" => FitStatus::Converged,
            "no-signal" => FitStatus::NoSignal,
            other => return Err(row.error(&format!("unknown status `{other}`"))),
        };
        let mut p = Vec::with_capacity(nmax);
        let mut sp = Vec::with_capacity(nmax);
        for n in 1..=nmax {
            p.push(row.parse(&format!("p_{n}"))?);
            sp.push(row.parse(&format!("sigma_p_{n}"))?);
        }
        for n in nmax + 1..=max_order {
            if !row.text(&format!("p_{n}"))?.is_empty() {
                return Err(row.error(&format!("p_{n} given above nmax {nmax}")));
            }
        }
        let response = DetectorResponse::new(row.parse("eta")?, p, row.parse("p_tail")?)
            .map_err(|e| row.error(&e.to_string()))?;
        let error_source = ErrorSource::parse(row.text("error_source")?)
            .ok_or_else(|| row.error("error_source must be bootstrap, asymptotic or none"))?;
        rows.push(ResponseRow {
            wavelength_nm: row.parse("wavelength_nm")?,
            bias_current_ua: row.parse("bias_current_uA")?,
            status,
            response,
            errors: ResponseErrors {
                eta: row.parse("sigma_eta")?,
                p: sp,
                p_tail: row.parse("sigma_p_tail")?,
            },
            error_source,
            deviance: row.parse("deviance")?,
            dof: row.parse("dof")?,
            deviance_per_dof: row.parse("deviance_per_dof")?,
        });
    }
    Ok(rows)
}

pub fn read_responses(path: &Path) -> Result<Vec<ResponseRow>> {
    let table_text = std::fs::read_to_string(path).map_err(|e| super::table::io_error(path, &e))?;
    parse_responses(&table_text, &path.display().to_string())
}

pub fn write_responses(path: &Path, rows: &[ResponseRow]) -> Result<()> {
    write_atomic(path, &render_responses(rows))
}
