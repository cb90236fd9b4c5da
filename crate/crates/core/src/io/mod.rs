//! File formats: sweep input, response tables, decomposition files and
//! analysis outputs. Every writer has a matching parser that restores the
//! written values exactly.

mod decomposition;
mod report;
mod responses;
mod sweep;
mod table;

pub use decomposition::{
    decompose_sweep, decomposition_file_name, parse_decomposition, read_decomposition,
    render_decomposition, write_decomposition, DecompositionRow,
};
pub use report::{
    model_curve_energies, parse_collapse, parse_curves, parse_exclusions, parse_gamma_scan,
    parse_model_fits, parse_numeric_table, parse_summary, parse_thresholds, read_summary,
    read_thresholds, render_collapse, render_curves, render_exclusions, render_gamma_scan,
    render_model_curves, render_model_fits, render_summary, render_thresholds, write_report,
    AnalysisSummary, ModelFitRow, NumericTable, COLLAPSE_FILE, CURVES_FILE, EXCLUSIONS_FILE,
    GAMMA_SCAN_FILE, MODEL_CURVES_FILE, MODEL_FITS_FILE, SUMMARY_FILE, THRESHOLDS_FILE,
};
pub use responses::{
    parse_responses, read_responses, render_responses, write_responses, ErrorSource, ResponseRow,
};
pub use sweep::{
    list_sweep_files, parse_sweep, read_sweep, render_sweep, sweep_file_name, write_sweep,
    SWEEP_HEADER,
};
pub use table::{format_f64, write_atomic};

/// Name of the response table written by a reconstruction.
pub const RESPONSES_FILE: &str = "responses.csv";
