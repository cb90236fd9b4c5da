//! Commands behind the `sspd` binary.
//!
//! Output layout under the output directory:
//!
//! ```text
//! config_echo.conf
//! sweeps/sweep_<wl>nm_<ib>uA.csv
//! responses.csv
//! decomposition/decomposition_<wl>nm_<ib>uA.csv
//! analysis/{curves,thresholds,collapse,gamma_scan,model_fits,model_curves,exclusions,summary}.csv
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rayon::prelude::*;

use sspd_core::analysis::{run_analysis, AnalysisReport};
use sspd_core::config::{RunConfig, CONFIG_ECHO_FILE};
use sspd_core::io::{
    decompose_sweep, decomposition_file_name, list_sweep_files, read_responses, read_sweep,
    write_atomic, write_decomposition, write_report, write_responses, write_sweep, ResponseRow,
    RESPONSES_FILE,
};
use sspd_core::rng::{float_key, stream_id};
use sspd_core::selftest::{run_selftest, CheckOutcome};
use sspd_core::simulator::simulate_campaign;
use sspd_core::tomography::{
    bootstrap_errors, fit_shared_eta, select_model_order, ReconstructionResult, SweepData,
};
use sspd_core::{Error, Result};

pub const SWEEPS_DIR: &str = "sweeps";
pub const DECOMPOSITION_DIR: &str = "decomposition";
pub const ANALYSIS_DIR: &str = "analysis";

/// Exit status for a failed self-test.
pub const EXIT_SELFTEST: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_FIT: i32 = 3;
pub const EXIT_IO: i32 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "sspd",
    version,
    about = "Detector tomography and multiphoton analysis for nanowire detectors"
)]
pub struct Cli {
    /// Run configuration (`section.key = value` lines). Defaults apply
    /// when omitted.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Overrides `campaign.seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Overrides `output.dir`.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Suppress progress messages.
    #[arg(long, short, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a campaign and write one sweep file per (wavelength, bias current).
    Simulate,
    /// Reconstruct detector responses from sweep files.
    Reconstruct {
        /// Sweep files or directories holding them [default: <out>/sweeps].
        inputs: Vec<PathBuf>,
    },
    /// Thresholds, scaling law, collapse and model fits from a response table.
    Analyze {
        /// Response table [default: <out>/responses.csv].
        responses: Option<PathBuf>,
    },
    /// simulate, reconstruct and analyze in one run.
    Pipeline,
    /// Check the numerical core against independent oracles.
    Selftest,
}

/// Maps an error onto the process exit status.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Domain(_) => EXIT_CONFIG,
        Error::FitFailure { .. }
        | Error::BootstrapFailure { .. }
        | Error::NoThreshold { .. }
        | Error::Singular(_)
        | Error::UndefinedScore
        | Error::InsufficientData(_)
        | Error::InvalidResponse(_) => EXIT_FIT,
        Error::Io { .. } | Error::Parse { .. } | Error::InvalidSweep(_) => EXIT_IO,
    }
}

struct Progress {
    quiet: bool,
}

impl Progress {
    fn note(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }
}

/// Reads the configuration and applies command-line overrides.
pub fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::read(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.campaign.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output.dir = out.display().to_string();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write_echo(cfg: &RunConfig) -> Result<()> {
    write_atomic(
        &cfg.output_dir().join(CONFIG_ECHO_FILE),
        cfg.echo().as_bytes(),
    )
}

/// Simulates the configured campaign into `<out>/sweeps`.
pub fn simulate(cfg: &RunConfig) -> Result<Vec<SweepData>> {
    let sweeps = simulate_campaign(&cfg.detector(), &cfg.campaign_plan())?;
    let dir = cfg.output_dir().join(SWEEPS_DIR);
    for s in &sweeps {
        write_sweep(&dir, s)?;
    }
    Ok(sweeps)
}

/// Reads sweep files; directories contribute every sweep file they hold.
/// The result is ordered by wavelength, then bias current.
pub fn read_sweeps(inputs: &[PathBuf]) -> Result<Vec<SweepData>> {
    let mut files = Vec::new();
    for p in inputs {
        if p.is_dir() {
            files.extend(list_sweep_files(p)?);
        } else {
            files.push(p.clone());
        }
    }
    if files.is_empty() {
        return Err(Error::Io {
            path: inputs
                .iter()
                .map(|p| p.display().to_string())
                .collect::<Vec<_>>()
                .join(", "),
            message: "no sweep files found".into(),
        });
    }
    let mut sweeps: Vec<SweepData> = files.iter().map(|f| read_sweep(f)).collect::<Result<_>>()?;
    for s in &sweeps {
        s.validate()?;
    }
    sweeps.sort_by(|a, b| {
        let key = |s: &SweepData| {
            (
                s.wavelength_nm().unwrap_or(0.0),
                s.bias_current_ua().unwrap_or(0.0),
            )
        };
        let (ka, kb) = (key(a), key(b));
        ka.0.total_cmp(&kb.0).then(ka.1.total_cmp(&kb.1))
    });
    for w in sweeps.windows(2) {
        if w[0].wavelength_nm() == w[1].wavelength_nm()
            && w[0].bias_current_ua() == w[1].bias_current_ua()
        {
            return Err(Error::InvalidSweep(format!(
                "{} and {} hold the same setting",
                w[0].source, w[1].source
            )));
        }
    }
    Ok(sweeps)
}

/// Bootstrap stream of one sweep, derived from the run seed and setting.
fn bootstrap_seed(seed: u64, s: &SweepData) -> u64 {
    stream_id(&[
        seed,
        float_key(s.wavelength_nm().unwrap_or(0.0)),
        float_key(s.bias_current_ua().unwrap_or(0.0)),
    ])
}

/// One reconstructed sweep with any non-fatal remark.
pub struct SweepReconstruction {
    pub result: ReconstructionResult,
    pub remark: Option<String>,
}

/// Model order by AIC, then bootstrap errors, for every sweep. With
/// `fit.shared_eta` the sweeps of each wavelength are refitted jointly at
/// their selected orders and keep inverse-Fisher errors.
pub fn reconstruct(cfg: &RunConfig, sweeps: &[SweepData]) -> Result<Vec<SweepReconstruction>> {
    let opts = cfg.fit_options();
    let candidates = &cfg.fit.nmax_candidates;
    let selections: Vec<_> = sweeps
        .par_iter()
        .map(|s| select_model_order(s, candidates, &opts))
        .collect::<Result<_>>()?;

    let mut results: Vec<ReconstructionResult> = selections.into_iter().map(|s| s.best).collect();
    if cfg.fit.shared_eta {
        let mut groups: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
        for (i, s) in sweeps.iter().enumerate() {
            groups
                .entry(float_key(s.wavelength_nm().unwrap_or(0.0)))
                .or_default()
                .push(i);
        }
        for idx in groups.values() {
            let group: Vec<SweepData> = idx.iter().map(|&i| sweeps[i].clone()).collect();
            let orders: Vec<usize> = idx.iter().map(|&i| results[i].nmax()).collect();
            let joint = fit_shared_eta(&group, &orders, &opts)?;
            for (&i, r) in idx.iter().zip(joint) {
                results[i] = r;
            }
        }
        return Ok(results
            .into_iter()
            .map(|result| SweepReconstruction {
                result,
                remark: None,
            })
            .collect());
    }

    let resamples = cfg.fit.bootstrap_resamples;
    let seed = cfg.campaign.seed;
    Ok(results
        .into_par_iter()
        .zip(sweeps.par_iter())
        .map(|(mut result, s)| {
            let mut remark = None;
            if resamples > 0 && result.converged() {
                match bootstrap_errors(s, &result, resamples, bootstrap_seed(seed, s)) {
                    Ok(e) => result.standard_errors = Some(e),
                    Err(e) => {
                        remark = Some(format!("{}: {e}; keeping inverse-Fisher errors", s.source))
                    }
                }
            }
            SweepReconstruction { result, remark }
        })
        .collect())
}

/// Writes the response table and one decomposition file per sweep.
pub fn write_reconstruction(
    out: &Path,
    sweeps: &[SweepData],
    recs: &[SweepReconstruction],
) -> Result<Vec<ResponseRow>> {
    let rows: Vec<ResponseRow> = recs
        .iter()
        .map(|r| ResponseRow::from_result(&r.result))
        .collect();
    write_responses(&out.join(RESPONSES_FILE), &rows)?;
    let dir = out.join(DECOMPOSITION_DIR);
    for (s, r) in sweeps.iter().zip(recs) {
        let rows = decompose_sweep(s, &r.result.response)?;
        let name = decomposition_file_name(r.result.wavelength_nm, r.result.bias_current_ua);
        write_decomposition(&dir.join(name), &rows)?;
    }
    Ok(rows)
}

/// Runs the analysis on stored response rows and writes its tables.
pub fn analyze(cfg: &RunConfig, rows: &[ResponseRow]) -> Result<AnalysisReport> {
    let opts = cfg.analysis_options()?;
    let results: Vec<ReconstructionResult> = rows.iter().map(ResponseRow::to_result).collect();
    let report = run_analysis(&results, &opts)?;
    write_report(&cfg.output_dir().join(ANALYSIS_DIR), &report, opts.level)?;
    Ok(report)
}

fn report_summary(p: &Progress, report: &AnalysisReport) {
    p.note(format!(
        "gamma = {:.3} +/- {:.3} uA/eV, intercept = {:.3} +/- {:.3} uA",
        report.scaling.gamma_ua_per_ev,
        report.scaling.sigma_gamma(),
        report.scaling.intercept_ua,
        report.scaling.sigma_intercept()
    ));
    p.note(format!(
        "collapse score {:.4} dex over {:.2} decades; scan minimum at {}",
        report.collapse.score,
        report.collapse.decades,
        report
            .best_gamma
            .map(|g| format!("{g} uA/eV"))
            .unwrap_or_else(|| "none".into())
    ));
    for f in &report.model_fits {
        p.note(format!(
            "{}: chi2/dof = {:.3}{}",
            f.kind.name(),
            f.chi2_per_dof,
            f.flag
                .as_ref()
                .map(|s| format!(" ({s})"))
                .unwrap_or_default()
        ));
    }
    for e in &report.exclusions {
        p.note(format!(
            "excluded {} nm, n = {}: {}",
            e.wavelength_nm, e.photon_number, e.reason
        ));
    }
    p.note(report.dark.note());
}

fn reconstruct_and_write(
    p: &Progress,
    cfg: &RunConfig,
    sweeps: &[SweepData],
) -> Result<Vec<ResponseRow>> {
    p.note(format!("reconstructing {} sweeps", sweeps.len()));
    let recs = reconstruct(cfg, sweeps)?;
    for r in &recs {
        if let Some(m) = &r.remark {
            p.note(format!("warning: {m}"));
        }
    }
    write_reconstruction(&cfg.output_dir(), sweeps, &recs)
}

/// Executes a parsed command line. Returns the process exit status.
pub fn run(cli: &Cli) -> Result<i32> {
    let p = Progress { quiet: cli.quiet };
    if let Command::Selftest = cli.command {
        let outcomes = run_selftest();
        let mut failed = 0;
        for CheckOutcome {
            name,
            passed,
            detail,
        } in &outcomes
        {
            println!("{} {name}: {detail}", if *passed { "PASS" } else { "FAIL" });
            failed += usize::from(!passed);
        }
        println!(
            "{} of {} checks passed",
            outcomes.len() - failed,
            outcomes.len()
        );
        return Ok(if failed == 0 { 0 } else { EXIT_SELFTEST });
    }

    let cfg = load_config(cli)?;
    let out = cfg.output_dir();
    match &cli.command {
        Command::Simulate => {
            write_echo(&cfg)?;
            let sweeps = simulate(&cfg)?;
            p.note(format!(
                "wrote {} sweep files to {}",
                sweeps.len(),
                out.join(SWEEPS_DIR).display()
            ));
        }
        Command::Reconstruct { inputs } => {
            let inputs = if inputs.is_empty() {
                vec![out.join(SWEEPS_DIR)]
            } else {
                inputs.clone()
            };
            let sweeps = read_sweeps(&inputs)?;
            write_echo(&cfg)?;
            reconstruct_and_write(&p, &cfg, &sweeps)?;
            p.note(format!("wrote {}", out.join(RESPONSES_FILE).display()));
        }
        Command::Analyze { responses } => {
            cfg.analysis_options()?;
            let path = responses
                .clone()
                .unwrap_or_else(|| out.join(RESPONSES_FILE));
            let rows = read_responses(&path)?;
            write_echo(&cfg)?;
            let report = analyze(&cfg, &rows)?;
            report_summary(&p, &report);
        }
        Command::Pipeline => {
            // Fail on missing analysis constants before any work is done.
            cfg.analysis_options()?;
            write_echo(&cfg)?;
            let sweeps = simulate(&cfg)?;
            p.note(format!("simulated {} sweeps", sweeps.len()));
            // Analysis reads the rows back so that it sees exactly the
            // stored values, as a separate `analyze` run would.
            reconstruct_and_write(&p, &cfg, &sweeps)?;
            let rows = read_responses(&out.join(RESPONSES_FILE))?;
            let report = analyze(&cfg, &rows)?;
            report_summary(&p, &report);
        }
        Command::Selftest => unreachable!("handled above"),
    }
    Ok(0)
}
