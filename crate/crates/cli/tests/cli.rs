//! The `sspd` binary: subcommands, output layout and exit codes.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use sspd_core::io::{
    parse_decomposition, parse_model_fits, read_responses, read_summary, RESPONSES_FILE,
};

/// A campaign small enough to run in a few seconds.
const SMALL: &str = "
campaign.wavelengths_nm = [1000.0, 1500.0]
campaign.bias_current_start_uA = 14.0
campaign.bias_current_stop_uA = 20.0
campaign.bias_current_step_uA = 1.0
campaign.photon_number_steps = 16
campaign.repeats = 2
fit.nmax_candidates = [1, 2, 3]
fit.bootstrap_resamples = 10
analysis.fluctuation_delta_eV = 2e-3
analysis.fluctuation_i0_uA = 57.5
analysis.fluctuation_beta = 1.0
";

fn sspd(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sspd"))
        .current_dir(dir)
        .arg("--quiet")
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("run.conf");
    fs::write(&path, text).unwrap();
    path.display().to_string()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn selftest_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = sspd(dir.path(), &["selftest"]);
    let out = String::from_utf8_lossy(&o.stdout);
    assert!(o.status.success(), "{out}");
    assert!(
        out.lines().filter(|l| l.starts_with("PASS")).count() >= 10,
        "{out}"
    );
    assert!(!out.contains("FAIL"));
}

#[test]
fn pipeline_writes_every_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let o = sspd(dir.path(), &["--config", &cfg, "--out", "run", "pipeline"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = dir.path().join("run");

    let sweeps = fs::read_dir(out.join("sweeps")).unwrap().count();
    assert_eq!(sweeps, 2 * 7);
    let rows = read_responses(&out.join(RESPONSES_FILE)).unwrap();
    assert_eq!(rows.len(), 2 * 7);

    for entry in fs::read_dir(out.join("decomposition")).unwrap() {
        let path = entry.unwrap().path();
        let text = fs::read_to_string(&path).unwrap();
        for row in parse_decomposition(&text, "d").unwrap() {
            let sum: f64 = row.contributions.iter().sum::<f64>() + row.tail;
            assert!(
                (sum - row.r_fit).abs() <= 1e-12,
                "{}: {sum} vs {}",
                path.display(),
                row.r_fit
            );
        }
    }

    let fits = fs::read_to_string(out.join("analysis/model_fits.csv")).unwrap();
    assert_eq!(parse_model_fits(&fits, "m").unwrap().len(), 3);
    let summary = read_summary(&out.join("analysis/summary.csv")).unwrap();
    assert!(summary.gamma_ua_per_ev < 0.0);

    let echo = fs::read_to_string(out.join("config_echo.conf")).unwrap();
    for key in [
        "analysis.level",
        "analysis.fluctuation_delta_eV",
        "analysis.fluctuation_i0_uA",
        "analysis.fluctuation_beta",
    ] {
        assert!(echo.contains(key), "echo lacks {key}");
    }
}

#[test]
fn reconstruct_then_analyze_matches_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    assert!(
        sspd(dir.path(), &["--config", &cfg, "--out", "a", "pipeline"])
            .status
            .success()
    );
    for step in ["simulate", "reconstruct", "analyze"] {
        let o = sspd(dir.path(), &["--config", &cfg, "--out", "b", step]);
        assert!(o.status.success(), "{step}: {}", stderr(&o));
    }
    for table in [
        "responses.csv",
        "analysis/thresholds.csv",
        "analysis/summary.csv",
        "analysis/model_fits.csv",
    ] {
        let a = fs::read(dir.path().join("a").join(table)).unwrap();
        let b = fs::read(dir.path().join("b").join(table)).unwrap();
        assert!(
            a == b,
            "{table} differs between pipeline and separate steps"
        );
    }
}

#[test]
fn empty_sweep_file_is_a_parse_error() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("sweep_empty.csv"), "").unwrap();
    let o = sspd(
        dir.path(),
        &["--out", "o", "reconstruct", "sweep_empty.csv"],
    );
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
    assert!(stderr(&o).contains("line 1"), "{}", stderr(&o));
}

#[test]
fn malformed_sweep_row_names_its_line() {
    let dir = tempfile::tempdir().unwrap();
    let text = "wavelength_nm,bias_current_uA,mean_photon_number,pulses,clicks,repeat_index\n\
                1500,15,10,1000,3,0\n\
                1500,15,20,1000,oops,0\n";
    fs::write(dir.path().join("s.csv"), text).unwrap();
    let o = sspd(dir.path(), &["--out", "o", "reconstruct", "s.csv"]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
}

#[test]
fn single_wavelength_single_order_is_insufficient() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        &SMALL.replace("[1000.0, 1500.0]", "[1500.0]").replace(
            "fit.nmax_candidates = [1, 2, 3]",
            "fit.nmax_candidates = [1]",
        ),
    );
    let o = sspd(dir.path(), &["--config", &cfg, "--out", "o", "pipeline"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("insufficient data"), "{}", stderr(&o));
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    for bad in [
        "campaign.bias_current_start_uA = 20.0\ncampaign.bias_current_stop_uA = 10.0\n",
        "campaign.no_such_key = 1\n",
        "analysis.level = 1.5\n",
        "analysis.fluctuation_beta = 1.0\n",
    ] {
        let cfg = write_config(dir.path(), bad);
        let o = sspd(dir.path(), &["--config", &cfg, "simulate"]);
        assert_eq!(o.status.code(), Some(2), "{bad}: {}", stderr(&o));
    }
}

#[test]
fn analysis_without_fluctuation_constants_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = sspd(dir.path(), &["--out", "o", "pipeline"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(
        !dir.path().join("o/sweeps").exists(),
        "work started before the check"
    );
}

#[test]
fn missing_inputs_are_io_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let o = sspd(
        dir.path(),
        &["--config", &cfg, "--out", "o", "analyze", "nowhere.csv"],
    );
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
    let o = sspd(dir.path(), &["--config", "absent.conf", "simulate"]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
}

#[test]
fn seed_flag_changes_the_draws() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    for (seed, out) in [("1", "s1"), ("2", "s2")] {
        assert!(sspd(
            dir.path(),
            &["--config", &cfg, "--seed", seed, "--out", out, "simulate"]
        )
        .status
        .success());
    }
    let name = "sweeps/sweep_1500nm_17uA.csv";
    let a = fs::read(dir.path().join("s1").join(name)).unwrap();
    let b = fs::read(dir.path().join("s2").join(name)).unwrap();
    assert_ne!(a, b);
}
