//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits non-zero
//! if any criterion fails.

#![allow(clippy::needless_range_loop)]

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use jcas_core::artifact::rdmx_bytes;
use jcas_core::channel::{synthesize_rx, ChannelConfig, Target};
use jcas_core::comms::{bits_per_frame, despread, run_link, CommsLink};
use jcas_core::detect::{evaluate, find_peaks, Detection, MapTag, PeakParams, Tolerance, Truth};
use jcas_core::dft::{energy, unitary_dft};
use jcas_core::receiver::{process_sensing, RdMatrix, SensingOptions, WindowKind};
use jcas_core::rng::{stream, Stream};
use jcas_core::runner::{simulate, SchemeOutput};
use jcas_core::scenario::{Scenario, ScenarioTarget};
use jcas_core::scheduler::{make_schedule, RtdMode, Scheme};
use jcas_core::waveform::{
    assemble_frame, make_base_set, make_code_matrix, payload_len, random_qpsk, spread_and_assemble,
    Waveforms,
};
use jcas_core::{Complex64, WaveformConfig};
use rand::Rng;
use statrs::function::erf::erfc;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    if elapsed <= limit {
        Ok(())
    } else {
        Err(format!("took {elapsed:.2?}, limit {limit:?}"))
    }
}

fn kmh_bin(cfg: &WaveformConfig, g: usize) -> f64 {
    cfg.wavelength() / 2.0 / (g as f64 * cfg.t_chirp()) * 3.6
}

/// Off-class spectral energy of every shifted base row.
fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = stream(101, Stream::SelfTest);
    let mut worst = 0.0f64;
    for m in [2usize, 4, 8] {
        for n in [64usize, 2048] {
            let cfg = WaveformConfig::with_grid(n, m);
            let chirp: Vec<Complex64> = (0..cfg.l_occ())
                .map(|_| Complex64::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU)))
                .collect();
            let base = make_base_set(&cfg, &chirp).map_err(|e| e.to_string())?;
            for (row, x) in base.rows.iter().enumerate() {
                let spec = unitary_dft(x).map_err(|e| e.to_string())?;
                let off: f64 = spec
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| i % m != row)
                    .map(|(_, v)| v.norm_sqr())
                    .sum();
                worst = worst.max(off / energy(&spec));
            }
        }
    }
    within(start.elapsed(), Duration::from_secs(1))?;
    check(
        worst <= 1e-10,
        format!("worst off-class energy fraction {worst:.2e} (bound 1e-10)"),
    )
}

fn criterion_2() -> Outcome {
    let mut rng = stream(102, Stream::SelfTest);
    let (mut unitary, mut shift, mut roundtrip) = (0.0f64, 0.0f64, 0.0f64);
    for m in [2usize, 4, 8] {
        let cfg = WaveformConfig::with_grid(2048, m);
        let w = Waveforms::new(cfg).map_err(|e| e.to_string())?;
        let u = make_code_matrix(m).map_err(|e| e.to_string())?;
        // U U^H against the identity, computed here rather than by the library
        for a in 0..m {
            for b in 0..m {
                let dot: Complex64 = (0..m).map(|k| u.get(a, k) * u.get(b, k).conj()).sum();
                let eye = if a == b { 1.0 } else { 0.0 };
                unitary = unitary.max((dot - eye).norm());
            }
        }
        let (n, l) = (cfg.n_fft, cfg.l_occ());
        for code in 0..m {
            let next = w.sensing.code((code + 1) % m);
            for i in 0..n {
                shift = shift.max((w.sensing.code(code)[(i + n - l) % n] - next[i]).norm());
            }
        }
        for sensing in 0..m {
            let data: Vec<Vec<Complex64>> = (0..m - 1).map(|_| random_qpsk(l, &mut rng)).collect();
            let grid = spread_and_assemble(&cfg, sensing, &w.chirp_spectrum, &data, &u)
                .map_err(|e| e.to_string())?;
            let ds = despread(&grid.s, &u, sensing).map_err(|e| e.to_string())?;
            for (a, b) in ds.data.iter().flatten().zip(data.iter().flatten()) {
                roundtrip = roundtrip.max((a - b).norm());
            }
        }
    }
    check(
        unitary <= 1e-12 && shift <= 1e-12 && roundtrip <= 1e-12,
        format!("|UU^H - I| {unitary:.1e}, shift identity {shift:.1e}, despread {roundtrip:.1e} (bound 1e-12)"),
    )
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let cfg = WaveformConfig::default();
    let w = Waveforms::new(cfg).map_err(|e| e.to_string())?;
    let s = make_schedule(
        Scheme::FsiRandom,
        cfg.m_codes,
        64,
        RtdMode::Unconstrained,
        &mut stream(103, Stream::Schedule),
    )
    .map_err(|e| e.to_string())?;
    let tx = assemble_frame(
        &w,
        &s,
        &random_qpsk(payload_len(&cfg, &s), &mut stream(103, Stream::Payload)),
    )
    .map_err(|e| e.to_string())?;
    let opts = SensingOptions::default();
    let si_only = ChannelConfig {
        noise_enabled: false,
        ..ChannelConfig::default()
    };
    let rx = synthesize_rx(&tx, &[], &si_only, &cfg, &mut stream(103, Stream::Noise))
        .map_err(|e| e.to_string())?;
    let residual = process_sensing(&rx, &w, &s, WindowKind::Standard, &opts)
        .map_err(|e| e.to_string())?
        .max_power();
    let echo = Target::new(10.0 * cfg.range_bin_m(), 0.0);
    let rx = synthesize_rx(
        &tx,
        &[echo],
        &ChannelConfig::clean(),
        &cfg,
        &mut stream(103, Stream::Noise),
    )
    .map_err(|e| e.to_string())?;
    let reference =
        process_sensing(&rx, &w, &s, WindowKind::Standard, &opts).map_err(|e| e.to_string())?;
    let peak = reference.power(10, 0);
    within(start.elapsed(), Duration::from_secs(10))?;
    let ratio = residual / peak;
    check(
        ratio <= 1e-8,
        format!("SI residue / unit-echo peak = {ratio:.2e} (bound 1e-8)"),
    )
}

fn run_preset(name: &str) -> Result<Vec<SchemeOutput>, String> {
    let scn = Scenario {
        comms: None,
        ..Scenario::preset(name).map_err(|e| e.to_string())?
    };
    simulate(&scn, None).map_err(|e| e.to_string())
}

fn output(outs: &[SchemeOutput], scheme: Scheme) -> &SchemeOutput {
    outs.iter()
        .find(|o| o.run.scheme == scheme)
        .expect("scheme ran")
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let outs = run_preset("fig6")?;
    let elapsed = start.elapsed();
    let cfg = WaveformConfig::default();
    let truth = [
        Truth {
            range_m: 200.0,
            velocity_kmh: -250.0,
        },
        Truth {
            range_m: 400.0,
            velocity_kmh: 500.0,
        },
    ];
    let tol = Tolerance::default();
    let mut failures = Vec::new();
    let mut notes = Vec::new();

    let so = output(&outs, Scheme::SensingOnly);
    if so.run.eval.misses.is_empty() {
        notes.push("(a) both found".to_string());
    } else {
        failures.push(format!("(a) missed {:?}", so.run.eval.misses));
    }

    // folding oracle: the periodic schedule samples at 1/(M T_chirp)
    let f = 2.0 * (500.0 / 3.6) / cfg.wavelength();
    let prf = 1.0 / (cfg.m_codes as f64 * cfg.t_chirp());
    let alias_hz = f - prf * (f / prf).round();
    let alias_kmh = alias_hz * cfg.wavelength() / 2.0 * 3.6;
    let ptd = output(&outs, Scheme::PeriodicTd);
    let alias_truth = [
        truth[0],
        Truth {
            range_m: 400.0,
            velocity_kmh: alias_kmh,
        },
    ];
    let rd = &ptd.maps[0].1;
    let ev = evaluate(&ptd.run.detections, &alias_truth, &tol, &[rd]);
    if ev.misses.is_empty() && (alias_kmh + 40.0).abs() < 0.5 {
        notes.push(format!("(b) alias at {alias_kmh:.1} km/h"));
    } else {
        failures.push(format!(
            "(b) alias oracle {alias_kmh:.2} km/h, misses {:?}",
            ev.misses
        ));
    }

    for (label, scheme) in [("(c)", Scheme::Rtd), ("(d)", Scheme::FsiRandom)] {
        let o = output(&outs, scheme);
        let ev = &o.run.eval;
        let pir = ev.peak_to_interference_db.unwrap_or(f64::NEG_INFINITY);
        if !ev.misses.is_empty() {
            failures.push(format!("{label} missed {:?}", ev.misses));
        }
        if pir >= 10.0 {
            notes.push(format!("{label} PIR {pir:.1} dB"));
        } else {
            failures.push(format!(
                "{label} both found = {}, PIR {pir:.1} dB < 10 dB",
                ev.misses.is_empty()
            ));
        }
    }
    within(elapsed, Duration::from_secs(120))?;
    if failures.is_empty() {
        Ok(notes.join("; "))
    } else {
        Err(format!(
            "{}; passing: {}",
            failures.join("; "),
            notes.join("; ")
        ))
    }
}

fn near(dets: &[Detection], tag: MapTag, range_m: f64, tol_m: f64) -> Option<&Detection> {
    dets.iter()
        .find(|d| d.map == tag && (d.range_m - range_m).abs() <= tol_m)
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let cfg = WaveformConfig::default();
    let tol_m = 2.0 * cfg.range_bin_m() + 1e-9;
    let mut notes = Vec::new();

    let outs = run_preset("fig7")?;
    let o = &outs[0];
    let params = PeakParams::default();
    let span = cfg.l_occ() as f64 * cfg.range_bin_m();
    for (tag, rd) in o.maps.iter().take(2) {
        let dets = find_peaks(rd, MapTag::Single, &params).map_err(|e| e.to_string())?;
        if dets.iter().any(|d| d.range_m >= span) {
            return Err(format!("{tag} window reports beyond {span} m"));
        }
        if near(&dets, MapTag::Single, 900.0 - span, tol_m).is_none() {
            return Err(format!(
                "{tag} window: 900 m target not folded to {:.0} m",
                900.0 - span
            ));
        }
    }
    notes.push("windows fold 900 m to 275 m".into());
    let dets = &o.run.detections;
    match (
        near(dets, MapTag::Near, 100.0, tol_m),
        near(dets, MapTag::Far, 900.0, tol_m),
    ) {
        (Some(a), Some(b)) => {
            notes.push(format!("near {:.1} m, far {:.1} m", a.range_m, b.range_m))
        }
        _ => {
            return Err(format!(
                "solved maps: {:?}",
                dets.iter().map(|d| (d.range_m, d.map)).collect::<Vec<_>>()
            ))
        }
    }

    let outs = run_preset("fig7_offgrid")?;
    let dets = &outs[0].run.detections;
    match (
        near(dets, MapTag::Near, 400.0, tol_m),
        near(dets, MapTag::Near, 500.0, tol_m),
    ) {
        (Some(a), Some(b)) => notes.push(format!(
            "off-grid pair at {:.1} m and {:.1} m",
            a.range_m, b.range_m
        )),
        _ => {
            return Err(format!(
                "off-grid: {:?}",
                dets.iter().map(|d| (d.range_m, d.map)).collect::<Vec<_>>()
            ))
        }
    }
    within(start.elapsed(), Duration::from_secs(120))?;
    Ok(notes.join("; "))
}

fn criterion_6() -> Outcome {
    let cfg = WaveformConfig::default();
    let g = 320usize;
    let bin_kmh = kmh_bin(&cfg, g);
    // nearest grid point to +1069 km/h
    let nu = (1069.0 / bin_kmh).round() as i64;
    let v_kmh = nu as f64 * bin_kmh;
    let scn = Scenario {
        schemes: vec![Scheme::Rtd, Scheme::FsiRandom, Scheme::PeriodicTd],
        targets: vec![ScenarioTarget {
            range_m: 300.0,
            velocity_kmh: v_kmh,
            amplitude: 1.0,
        }],
        seed: 6,
        ..Scenario::default()
    };
    let outs = simulate(&scn, None).map_err(|e| e.to_string())?;
    let peak = |o: &SchemeOutput| -> Result<i64, String> {
        o.run
            .detections
            .first()
            .map(|d| d.doppler_bin)
            .ok_or_else(|| format!("{:?}: no detection", o.run.scheme))
    };
    let rtd = peak(output(&outs, Scheme::Rtd))?;
    let fsi = peak(output(&outs, Scheme::FsiRandom))?;
    // folding oracle for the periodic schedule, in bins of the same grid
    let f = v_kmh / 3.6 * 2.0 / cfg.wavelength();
    let prf = 1.0 / (cfg.m_codes as f64 * cfg.t_chirp());
    let alias_bin = ((f - prf * (f / prf).round()) * g as f64 * cfg.t_chirp()).round() as i64;
    let ptd = peak(output(&outs, Scheme::PeriodicTd))?;
    check(
        rtd == nu && fsi == nu && ptd == alias_bin,
        format!("target bin {nu} ({v_kmh:.1} km/h): RTD {rtd}, FSI {fsi}, periodic {ptd} (oracle alias {alias_bin})"),
    )
}

fn criterion_7() -> Outcome {
    let cfg = WaveformConfig::default();
    let w = Waveforms::new(cfg).map_err(|e| e.to_string())?;
    let s = make_schedule(
        Scheme::FsiRandom,
        cfg.m_codes,
        64,
        RtdMode::Unconstrained,
        &mut stream(107, Stream::Schedule),
    )
    .map_err(|e| e.to_string())?;
    let per = bits_per_frame(&cfg, &s);
    let mut rng = stream(107, Stream::Comms);
    let bits: Vec<u8> = (0..per).map(|_| rng.random_range(0..2u8)).collect();
    let clean =
        run_link(&w, &s, &bits, &CommsLink::default(), &mut rng).map_err(|e| e.to_string())?;

    // leakage: despread every other code of a pure code-i symbol
    let u = make_code_matrix(cfg.m_codes).map_err(|e| e.to_string())?;
    let l = cfg.l_occ();
    let mut leak = 0.0f64;
    for i in 0..cfg.m_codes {
        let data: Vec<Vec<Complex64>> = vec![vec![Complex64::new(0.0, 0.0); l]; cfg.m_codes - 1];
        let grid = spread_and_assemble(&cfg, i, &w.chirp_spectrum, &data, &u)
            .map_err(|e| e.to_string())?;
        let ds = despread(&grid.s, &u, i).map_err(|e| e.to_string())?;
        let own = energy(&ds.sensing);
        leak = leak.max(ds.data.iter().map(|d| energy(d)).fold(0.0, f64::max) / own);
    }
    let leak_db = 10.0 * leak.max(1e-300).log10();

    let frames = 1_000_000usize.div_ceil(per);
    let bits: Vec<u8> = (0..frames * per)
        .map(|_| rng.random_range(0..2u8))
        .collect();
    let noisy = CommsLink {
        snr_db: Some(10.0),
        ..CommsLink::default()
    };
    let rep = run_link(&w, &s, &bits, &noisy, &mut rng).map_err(|e| e.to_string())?;
    let oracle = 0.5 * erfc(10f64.sqrt() / 2f64.sqrt());
    let rel = (rep.ber - oracle).abs() / oracle;
    check(
        clean.bit_errors == 0 && clean.bits >= 100_000 && leak_db <= -100.0 && rel <= 0.3,
        format!(
            "noiseless {} errors / {} bits; leakage {leak_db:.0} dB; BER {:.3e} vs {oracle:.3e} over {} bits ({:+.1}%)",
            clean.bit_errors, clean.bits, rep.ber, rep.bits, 100.0 * (rep.ber - oracle) / oracle
        ),
    )
}

fn artifacts(threads: usize) -> Result<Vec<Vec<u8>>, String> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| e.to_string())?;
    pool.install(|| {
        let mut out = Vec::new();
        for name in ["fig6", "fig7"] {
            for o in run_preset(name)? {
                out.extend(
                    o.maps
                        .iter()
                        .map(|(_, rd): &(String, RdMatrix)| rdmx_bytes(rd)),
                );
            }
        }
        Ok(out)
    })
}

fn criterion_8() -> Outcome {
    let a = artifacts(1)?;
    let b = artifacts(4)?;
    let c = artifacts(4)?;
    check(
        a == b && b == c,
        format!("{} maps compared across 1/4/4 threads", a.len()),
    )
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("spectral support of shifted base set", criterion_1),
        ("code algebra", criterion_2),
        ("exact self-interference cancellation", criterion_3),
        ("two-target scheme comparison", criterion_4),
        ("dual-window distance extension", criterion_5),
        ("Doppler band edge", criterion_6),
        ("communications integrity", criterion_7),
        ("determinism", criterion_8),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(d) => println!("criterion {} {name}: PASS ({d}) [{secs:.1} s]", i + 1),
            Err(d) => {
                failed += 1;
                println!("criterion {} {name}: FAIL ({d}) [{secs:.1} s]", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
