//! Scenario execution: frames, channel, receiver, detection, scoring, artifacts.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::artifact;
use crate::channel::{synthesize_rx, Target};
use crate::comms::{bits_per_frame, run_link, LinkReport};
use crate::config::WaveformConfig;
use crate::detect::{evaluate, find_peaks, find_peaks_joint, Detection, EvalReport, MapTag, Truth};
use crate::error::{Error, Result};
use crate::receiver::{
    build_pattern, peak_cleanup, process_sensing, solve_windows, PatternTensor, RdMatrix,
    SensingOptions, WindowKind,
};
use crate::rng::{stream, Stream};
use crate::scenario::Scenario;
use crate::scheduler::{make_schedule, Schedule, Scheme};
use crate::waveform::{assemble_frame, payload_len, random_qpsk, Waveforms};

pub const CACHE_ENV: &str = "JCAS_CACHE_DIR";

/// Process exit codes of the command-line front end.
pub mod exit {
    pub const OK: i32 = 0;
    pub const FAILURE: i32 = 1;
    pub const INVALID: i32 = 2;
    pub const UNRESOLVABLE: i32 = 3;
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Unresolvable { .. } => exit::UNRESOLVABLE,
        Error::Io(_) | Error::CalibrationMismatch(_) => exit::FAILURE,
        _ => exit::INVALID,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternInfo {
    pub cache_key: String,
    pub cache_hit: bool,
    pub max_condition: f64,
    pub unresolvable_cells: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeRun {
    pub scheme: Scheme,
    pub k: usize,
    pub schedule: Schedule,
    /// Map tags in output order; files are `rd_<tag>.bin` and `rd_<tag>.csv`.
    pub maps: Vec<String>,
    pub detections: Vec<Detection>,
    pub eval: EvalReport,
    pub comms: Option<LinkReport>,
    /// In-band cells the dual-window solve could not separate.
    pub flagged_cells: usize,
    pub pattern: Option<PatternInfo>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario: Scenario,
    pub runs: Vec<SchemeRun>,
    pub elapsed_ms: f64,
}

/// A scheme run together with its maps.
#[derive(Debug, Clone)]
pub struct SchemeOutput {
    pub run: SchemeRun,
    pub maps: Vec<(String, RdMatrix)>,
}

/// Seed for one scheme, so schemes never share a random sequence.
pub fn scheme_seed(seed: u64, scheme: Scheme) -> u64 {
    seed ^ ((scheme as u64 + 1) << 40)
}

pub fn cache_dir() -> PathBuf {
    std::env::var_os(CACHE_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("jcas-cache"))
}

/// Hash of everything the pattern depends on.
pub fn pattern_key(cfg: &WaveformConfig, k: usize, n_guard: usize) -> String {
    let desc = serde_json::json!({ "format": 1, "waveform": cfg, "k": k, "n_guard": n_guard });
    hex::encode(Sha256::digest(desc.to_string().as_bytes()))
}

/// Load the pattern from `dir` when a matching entry exists, else build and store it.
pub fn load_or_build_pattern(
    w: &Waveforms,
    k: usize,
    n_guard: usize,
    seed: u64,
    dir: Option<&Path>,
) -> Result<(PatternTensor, PatternInfo)> {
    let key = pattern_key(&w.cfg, k, n_guard);
    let path = dir.map(|d| d.join(format!("pattern-{}.ptrn", &key[..16])));
    let cached = path
        .as_ref()
        .and_then(|p| std::fs::read(p).ok())
        .and_then(|b| artifact::parse_pattern(&b).ok())
        .filter(|(_, stored)| *stored == key)
        .map(|(p, _)| p);
    let hit = cached.is_some();
    let pattern = match cached {
        Some(p) => p,
        None => {
            let p = build_pattern(w, k, n_guard, seed)?;
            if let (Some(dir), Some(path)) = (dir, &path) {
                std::fs::create_dir_all(dir)?;
                let tmp = path.with_extension("tmp");
                std::fs::write(&tmp, artifact::pattern_bytes(&p, &key))?;
                std::fs::rename(&tmp, path)?;
            }
            p
        }
    };
    let info = PatternInfo {
        cache_key: key,
        cache_hit: hit,
        max_condition: pattern.max_condition(),
        unresolvable_cells: pattern.unresolvable_count(),
    };
    Ok((pattern, info))
}

/// Run every scheme of `scn` in memory.
pub fn simulate(scn: &Scenario, pattern_dir: Option<&Path>) -> Result<Vec<SchemeOutput>> {
    scn.validate()?;
    let w = Waveforms::new(scn.waveform)?;
    let pattern = if scn.schemes.contains(&Scheme::FsiTail) {
        Some(load_or_build_pattern(
            &w,
            scn.k_fsi,
            scn.n_guard,
            scn.seed,
            pattern_dir,
        )?)
    } else {
        None
    };
    scn.schemes
        .par_iter()
        .map(|&scheme| simulate_scheme(scn, &w, scheme, pattern.as_ref()))
        .collect()
}

pub fn simulate_scheme(
    scn: &Scenario,
    w: &Waveforms,
    scheme: Scheme,
    pattern: Option<&(PatternTensor, PatternInfo)>,
) -> Result<SchemeOutput> {
    let cfg = &w.cfg;
    let seed = scheme_seed(scn.seed, scheme);
    let k = scn.k_for(scheme);
    let schedule = make_schedule(
        scheme,
        cfg.m_codes,
        k,
        scn.rtd_mode,
        &mut stream(seed, Stream::Schedule),
    )?;
    let payload = random_qpsk(
        payload_len(cfg, &schedule),
        &mut stream(seed, Stream::Payload),
    );
    let tx = assemble_frame(w, &schedule, &payload)?;
    let targets: Vec<Target> = scn.targets.iter().map(|t| t.to_target()).collect();
    let rx = synthesize_rx(
        &tx,
        &targets,
        &scn.channel,
        cfg,
        &mut stream(seed, Stream::Noise),
    )?;
    let opts = SensingOptions {
        n_guard: scn.n_guard,
        quantizer: scn.quantizer,
    };
    let truth: Vec<Truth> = scn.targets.iter().map(|t| t.truth()).collect();

    let (maps, detections, eval, flagged) = if scheme == Scheme::FsiTail {
        let (pat, _) =
            pattern.ok_or_else(|| Error::Config("dual-window run without a pattern".into()))?;
        let std = process_sensing(&rx, w, &schedule, WindowKind::Standard, &opts)?;
        let shift = process_sensing(&rx, w, &schedule, WindowKind::Shifted, &opts)?;
        let solved = match scn.cleanup_radius {
            Some(radius) => {
                let clean = |rd: &RdMatrix| -> Result<RdMatrix> {
                    let peaks: Vec<(usize, usize)> =
                        find_peaks(rd, MapTag::Single, &scn.detection)?
                            .iter()
                            .map(|d| d.cell)
                            .collect();
                    Ok(peak_cleanup(rd, &peaks, radius))
                };
                solve_windows(&clean(&std)?, &clean(&shift)?, pat)?
            }
            None => solve_windows(&std, &shift, pat)?,
        };
        let dets = find_peaks_joint(
            &[(&solved.near, MapTag::Near), (&solved.far, MapTag::Far)],
            &scn.detection,
        )?;
        let eval = evaluate(&dets, &truth, &scn.tolerance, &[&solved.near, &solved.far]);
        let flagged = solved.flagged.len();
        let maps = vec![
            ("std".to_string(), std),
            ("shift".to_string(), shift),
            ("near".to_string(), solved.near),
            ("far".to_string(), solved.far),
        ];
        (maps, dets, eval, flagged)
    } else {
        let rd = process_sensing(&rx, w, &schedule, WindowKind::Standard, &opts)?;
        let dets = find_peaks(&rd, MapTag::Single, &scn.detection)?;
        let eval = evaluate(&dets, &truth, &scn.tolerance, &[&rd]);
        (vec![(scheme.tag().to_string(), rd)], dets, eval, 0)
    };

    let comms = match &scn.comms {
        Some(link) if bits_per_frame(cfg, &schedule) > 0 => {
            let mut rng = stream(seed, Stream::Comms);
            let bits: Vec<u8> = (0..bits_per_frame(cfg, &schedule))
                .map(|_| rng.random_range(0..2u8))
                .collect();
            Some(run_link(w, &schedule, &bits, link, &mut rng)?)
        }
        _ => None,
    };

    Ok(SchemeOutput {
        run: SchemeRun {
            scheme,
            k,
            schedule,
            maps: maps.iter().map(|(t, _)| t.clone()).collect(),
            detections,
            eval,
            comms,
            flagged_cells: flagged,
            pattern: pattern
                .filter(|_| scheme == Scheme::FsiTail)
                .map(|(_, info)| info.clone()),
        },
        maps,
    })
}

/// Run `scn` and write `rd_<tag>.bin`, `rd_<tag>.csv` and `report.json` into `out_dir`.
pub fn run_simulate(scn: &Scenario, out_dir: &Path) -> Result<RunReport> {
    let start = Instant::now();
    let outputs = simulate(scn, Some(&cache_dir()))?;
    std::fs::create_dir_all(out_dir)?;
    for out in &outputs {
        for (tag, rd) in &out.maps {
            artifact::write_rdmx(&out_dir.join(format!("rd_{tag}.bin")), rd)?;
            artifact::write_csv(&out_dir.join(format!("rd_{tag}.csv")), rd)?;
        }
    }
    let report = RunReport {
        scenario: Scenario {
            output_dir: out_dir.to_path_buf(),
            ..scn.clone()
        },
        runs: outputs.into_iter().map(|o| o.run).collect(),
        elapsed_ms: start.elapsed().as_secs_f64() * 1e3,
    };
    std::fs::write(
        out_dir.join("report.json"),
        serde_json::to_string_pretty(&report)?,
    )?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub cache_path: PathBuf,
    pub info: PatternInfo,
    /// `(range bin, signed Doppler bin)` of every unresolvable cell.
    pub unresolvable: Vec<(usize, i64)>,
}

/// Build (or reuse) the pattern for the scenario's `FsiTail` configuration.
pub fn run_calibrate(scn: &Scenario, dir: &Path) -> Result<CalibrationReport> {
    scn.validate()?;
    if !scn.schemes.contains(&Scheme::FsiTail) {
        return Err(Error::Config(
            "calibration needs the fsi_tail scheme".into(),
        ));
    }
    let w = Waveforms::new(scn.waveform)?;
    let (pattern, info) = load_or_build_pattern(&w, scn.k_fsi, scn.n_guard, scn.seed, Some(dir))?;
    let unresolvable = pattern
        .cells
        .iter()
        .enumerate()
        .filter(|(_, c)| c.state == crate::receiver::CellState::Unresolvable)
        .map(|(i, _)| {
            (
                i / pattern.band_len,
                pattern.band_lo + (i % pattern.band_len) as i64,
            )
        })
        .collect();
    Ok(CalibrationReport {
        cache_path: dir.join(format!("pattern-{}.ptrn", &info.cache_key[..16])),
        info,
        unresolvable,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::ScenarioTarget;

    fn small(schemes: Vec<Scheme>) -> Scenario {
        Scenario {
            waveform: WaveformConfig::with_grid(256, 4),
            schemes,
            k_slotted: 16,
            k_fsi: 16,
            targets: vec![ScenarioTarget {
                range_m: 30.0,
                velocity_kmh: 0.0,
                amplitude: 1.0,
            }],
            ..Scenario::default()
        }
    }

    #[test]
    fn key_tracks_config() {
        let cfg = WaveformConfig::default();
        assert_eq!(pattern_key(&cfg, 64, 1), pattern_key(&cfg, 64, 1));
        assert_ne!(pattern_key(&cfg, 64, 1), pattern_key(&cfg, 32, 1));
        assert_ne!(
            pattern_key(&cfg, 64, 1),
            pattern_key(&WaveformConfig::with_grid(1024, 4), 64, 1)
        );
    }

    #[test]
    fn every_scheme_finds_a_static_target() {
        let scn = small(vec![
            Scheme::SensingOnly,
            Scheme::PeriodicTd,
            Scheme::Rtd,
            Scheme::FsiRandom,
        ]);
        for out in simulate(&scn, None).unwrap() {
            assert!(out.run.eval.misses.is_empty(), "{:?}", out.run.scheme);
        }
    }

    #[test]
    fn exit_codes() {
        assert_eq!(
            exit_code(&Error::Unresolvable { count: 2 }),
            exit::UNRESOLVABLE
        );
        assert_eq!(exit_code(&Error::Config("x".into())), exit::INVALID);
    }

    #[test]
    fn calibrate_hits_cache_second_time() {
        let dir = tempfile::tempdir().unwrap();
        let scn = small(vec![Scheme::FsiTail]);
        let first = run_calibrate(&scn, dir.path()).unwrap();
        assert!(!first.info.cache_hit);
        assert!(first.cache_path.exists());
        let second = run_calibrate(&scn, dir.path()).unwrap();
        assert!(second.info.cache_hit);
        assert_eq!(first.info.cache_key, second.info.cache_key);
        let other = Scenario { k_fsi: 8, ..scn };
        assert!(!run_calibrate(&other, dir.path()).unwrap().info.cache_hit);
    }
}
