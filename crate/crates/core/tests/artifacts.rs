//! Files written by a simulation run.

use std::path::Path;
use std::sync::Once;

use jcas_core::artifact::{rdmx_bytes, read_rdmx};
use jcas_core::runner::{run_calibrate, run_simulate, RunReport, CACHE_ENV};
use jcas_core::scenario::{Scenario, ScenarioTarget};
use jcas_core::scheduler::Scheme;
use jcas_core::WaveformConfig;

fn cache_in_tempdir() {
    static INIT: Once = Once::new();
    INIT.call_once(|| {
        let dir = tempfile::tempdir().unwrap().keep();
        std::env::set_var(CACHE_ENV, dir);
    });
}

fn scenario() -> Scenario {
    Scenario {
        name: "small".into(),
        waveform: WaveformConfig::with_grid(256, 4),
        schemes: vec![Scheme::Rtd, Scheme::FsiTail],
        k_slotted: 16,
        k_fsi: 16,
        targets: vec![
            ScenarioTarget {
                range_m: 60.0,
                velocity_kmh: 50.0,
                amplitude: 1.0,
            },
            ScenarioTarget {
                range_m: 150.0,
                velocity_kmh: -80.0,
                amplitude: 0.5,
            },
        ],
        ..Scenario::default()
    }
}

fn bins(dir: &Path, report: &RunReport) -> Vec<Vec<u8>> {
    report
        .runs
        .iter()
        .flat_map(|r| r.maps.iter())
        .map(|tag| std::fs::read(dir.join(format!("rd_{tag}.bin"))).unwrap())
        .collect()
}

#[test]
fn run_writes_every_map_and_a_report() {
    cache_in_tempdir();
    let out = tempfile::tempdir().unwrap();
    let report = run_simulate(&scenario(), out.path()).unwrap();
    let tags: Vec<&str> = report
        .runs
        .iter()
        .flat_map(|r| r.maps.iter().map(String::as_str))
        .collect();
    assert_eq!(tags, ["rtd", "std", "shift", "near", "far"]);
    for tag in tags {
        assert!(out.path().join(format!("rd_{tag}.bin")).is_file());
        assert!(out.path().join(format!("rd_{tag}.csv")).is_file());
    }
    let parsed: RunReport =
        serde_json::from_slice(&std::fs::read(out.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(parsed.runs, report.runs);
}

#[test]
fn csv_agrees_with_binary() {
    cache_in_tempdir();
    let out = tempfile::tempdir().unwrap();
    run_simulate(&scenario(), out.path()).unwrap();
    let rd = read_rdmx(&out.path().join("rd_near.bin")).unwrap();
    let csv = std::fs::read_to_string(out.path().join("rd_near.csv")).unwrap();
    let peak = rd.max_power().sqrt();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), rd.n_range);
    for (d, line) in lines.iter().enumerate() {
        let cols: Vec<f64> = line.split(',').map(|f| f.parse().unwrap()).collect();
        assert_eq!(cols.len(), rd.n_doppler);
        for (nu, m) in cols.iter().enumerate() {
            let want = rd.get(d, nu).norm() / peak;
            assert!(
                (m - want).abs() <= 1e-7 * want.max(1e-30) + 1e-300,
                "{d},{nu}"
            );
        }
    }
}

#[test]
fn rerun_from_report_reproduces_the_bytes() {
    cache_in_tempdir();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let first = run_simulate(&scenario(), a.path()).unwrap();
    let stored: RunReport =
        serde_json::from_slice(&std::fs::read(a.path().join("report.json")).unwrap()).unwrap();
    let second = run_simulate(&stored.scenario, b.path()).unwrap();
    assert_eq!(bins(a.path(), &first), bins(b.path(), &second));
    assert_eq!(
        first.runs,
        second
            .runs
            .iter()
            .cloned()
            .map(|mut r| {
                // the second run may hit the pattern cache the first one filled
                if let (Some(p), Some(q)) = (
                    r.pattern.as_mut(),
                    first
                        .runs
                        .iter()
                        .find(|f| f.scheme == r.scheme)
                        .and_then(|f| f.pattern.as_ref()),
                ) {
                    p.cache_hit = q.cache_hit;
                }
                r
            })
            .collect::<Vec<_>>()
    );
}

#[test]
fn binary_header_and_size() {
    cache_in_tempdir();
    let out = tempfile::tempdir().unwrap();
    run_simulate(&scenario(), out.path()).unwrap();
    let bytes = std::fs::read(out.path().join("rd_rtd.bin")).unwrap();
    assert_eq!(&bytes[..4], b"RDMX");
    assert_eq!(u16::from_le_bytes([bytes[4], bytes[5]]), 1);
    let rows = u32::from_le_bytes(bytes[6..10].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(bytes[10..14].try_into().unwrap()) as usize;
    assert_eq!((rows, cols), (64, 64));
    assert_eq!(bytes.len(), 14 + rows * cols * 16);
    assert_eq!(
        rdmx_bytes(&read_rdmx(&out.path().join("rd_rtd.bin")).unwrap()),
        bytes
    );
}

#[test]
fn calibration_is_cached() {
    let dir = tempfile::tempdir().unwrap();
    let scn = scenario();
    let first = run_calibrate(&scn, dir.path()).unwrap();
    let second = run_calibrate(&scn, dir.path()).unwrap();
    assert!(!first.info.cache_hit);
    assert!(second.info.cache_hit);
    assert!(second.cache_path.is_file());
    assert_eq!(first.info.max_condition, second.info.max_condition);
    assert!(first.unresolvable.is_empty());
}

#[test]
fn corrupt_cache_is_rebuilt() {
    let dir = tempfile::tempdir().unwrap();
    let scn = scenario();
    let first = run_calibrate(&scn, dir.path()).unwrap();
    std::fs::write(&first.cache_path, b"PTRN garbage").unwrap();
    let again = run_calibrate(&scn, dir.path()).unwrap();
    assert!(!again.info.cache_hit);
    assert_eq!(again.info.max_condition, first.info.max_condition);
}
