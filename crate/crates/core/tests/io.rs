//! Every file format restores exactly what was written.

use proptest::prelude::*;
use sspd_core::error::Error;
use sspd_core::io::{
    parse_decomposition, parse_responses, parse_sweep, read_sweep, render_decomposition,
    render_responses, render_sweep, write_sweep, DecompositionRow, ErrorSource, ResponseRow,
};
use sspd_core::photonics::DetectorResponse;
use sspd_core::tomography::{FitStatus, ResponseErrors, SweepData, SweepRecord};

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![0.0..1.0f64, 1e-300..1e300f64, -1e6..1e6f64]
}

fn prob() -> impl Strategy<Value = f64> {
    prop_oneof![0.0..=1.0f64, Just(0.0), Just(1.0), 1e-12..1e-3f64]
}

fn sweep() -> impl Strategy<Value = SweepData> {
    (
        1.0..5000.0f64,
        0.0..29.0f64,
        prop::collection::vec((1e-3..1e8f64, 1..u64::MAX / 2, 0..4u32), 1..20),
    )
        .prop_map(|(wl, ib, rows)| {
            let records = rows
                .into_iter()
                .map(|(n, pulses, rep)| SweepRecord {
                    wavelength_nm: wl,
                    bias_current_ua: ib,
                    mean_photon_number: n,
                    pulses,
                    clicks: pulses / 3,
                    repeat_index: rep,
                })
                .collect();
            SweepData::new(records, "generated")
        })
}

fn response_row() -> impl Strategy<Value = ResponseRow> {
    (
        1e-9..1.0f64,
        prop::collection::vec((prob(), 0.0..1.0f64), 1..7),
        prob(),
        (finite(), 0..1000usize, 1.0..5000.0f64, 0.0..29.0f64),
        prop_oneof![Just(ErrorSource::Bootstrap), Just(ErrorSource::Asymptotic)],
    )
        .prop_map(|(eta, p, tail, (dev, dof, wl, ib), source)| ResponseRow {
            wavelength_nm: wl,
            bias_current_ua: ib,
            status: FitStatus::Converged,
            response: DetectorResponse::new(eta, p.iter().map(|x| x.0).collect(), tail).unwrap(),
            errors: ResponseErrors {
                eta: eta / 7.0,
                p: p.iter().map(|x| x.1).collect(),
                p_tail: tail / 3.0,
            },
            error_source: source,
            deviance: dev.abs(),
            dof,
            deviance_per_dof: dev.abs() / dof.max(1) as f64,
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn sweeps_round_trip(data in sweep()) {
        let text = String::from_utf8(render_sweep(&data)).unwrap();
        let back = parse_sweep(&text, "mem").unwrap();
        prop_assert_eq!(back.records, data.records);
    }

    #[test]
    fn response_tables_round_trip(rows in prop::collection::vec(response_row(), 1..6)) {
        let text = String::from_utf8(render_responses(&rows)).unwrap();
        prop_assert_eq!(parse_responses(&text, "mem").unwrap(), rows);
    }

    #[test]
    fn decomposition_files_round_trip(
        raw in prop::collection::vec((finite(), prob(), prob(), prop::collection::vec(prob(), 3), prob()), 1..10)
    ) {
        let rows: Vec<DecompositionRow> = raw
            .into_iter()
            .map(|(n, o, f, c, t)| DecompositionRow {
                mean_photon_number: n.abs(),
                r_observed: o,
                r_fit: f,
                contributions: c,
                tail: t,
            })
            .collect();
        let text = String::from_utf8(render_decomposition(&rows)).unwrap();
        prop_assert_eq!(parse_decomposition(&text, "mem").unwrap(), rows);
    }
}

#[test]
fn sweep_files_round_trip_on_disk() {
    let dir = tempfile::tempdir().unwrap();
    let data = SweepData::new(
        vec![SweepRecord {
            wavelength_nm: 1300.0,
            bias_current_ua: 15.5,
            mean_photon_number: 0.1 + 0.2,
            pulses: 1_000_000,
            clicks: 12,
            repeat_index: 0,
        }],
        "mem",
    );
    let path = write_sweep(dir.path(), &data).unwrap();
    assert!(path.ends_with("sweep_1300nm_15.5uA.csv"));
    assert_eq!(read_sweep(&path).unwrap().records, data.records);
}

#[test]
fn malformed_row_reports_its_line() {
    let text = "wavelength_nm,bias_current_uA,mean_photon_number,pulses,clicks,repeat_index\n\
                1500,15,10,1000,3,0\n\
                1500,15,abc,1000,3,0\n";
    match parse_sweep(text, "bad.csv") {
        Err(Error::Parse {
            line, source_name, ..
        }) => {
            assert_eq!(line, 3);
            assert_eq!(source_name, "bad.csv");
        }
        other => panic!("expected a parse error, got {other:?}"),
    }
}

#[test]
fn clicks_above_pulses_are_rejected() {
    let text = "wavelength_nm,bias_current_uA,mean_photon_number,pulses,clicks,repeat_index\n\
                1500,15,10,1000,3000,0\n";
    assert!(matches!(
        parse_sweep(text, "x.csv"),
        Err(Error::Parse { line: 2, .. })
    ));
}

#[test]
fn empty_file_is_a_parse_error() {
    assert!(matches!(parse_sweep("", "e.csv"), Err(Error::Parse { .. })));
}
