//! Built-in invariant checks, runnable from the command line.

use num_complex::Complex64;
use rand::Rng;
use serde::Serialize;

use crate::channel::{synthesize_rx, ChannelConfig, Target};
use crate::comms::{bits_per_frame, despread, run_link, CommsLink};
use crate::config::WaveformConfig;
use crate::dft::{energy, unitary_dft, unitary_idft};
use crate::error::Result;
use crate::receiver::{
    build_pattern, delay_and_sum, mix, process_sensing, slow_time_matched_filter, RdAxes,
    SensingOptions, WindowKind,
};
use crate::rng::{stream, Stream};
use crate::scheduler::{make_schedule, occasion_grid_indices, RtdMode, Scheme};
use crate::waveform::{
    assemble_frame, make_base_set, payload_len, random_qpsk, spread_and_assemble, Waveforms,
};

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct SelfTestReport {
    pub checks: Vec<Check>,
}

impl SelfTestReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

type CheckFn = fn(&Waveforms, &mut rand_chacha::ChaCha8Rng) -> Result<(bool, String)>;

/// Run every check on a reduced grid. `inject_fault` perturbs one entry of the
/// code matrix by `1e-3` so the code checks must fail.
pub fn run_selftest(inject_fault: bool) -> SelfTestReport {
    let cfg = WaveformConfig::with_grid(256, 4);
    let mut w = Waveforms::new(cfg).expect("reduced grid is valid");
    if inject_fault {
        let v = w.codes.get(0, 0);
        w.codes.set(0, 0, v + Complex64::new(1e-3, 0.0));
    }
    let checks: &[(&'static str, CheckFn)] = &[
        ("dft_parseval", dft_parseval),
        ("spectral_support", spectral_support),
        ("code_unitarity", code_unitarity),
        ("code_shift_identity", code_shift_identity),
        ("despread_roundtrip", despread_roundtrip),
        ("si_cancellation", si_cancellation),
        ("matched_filter_oracle", matched_filter_oracle),
        ("on_grid_target_cell", on_grid_target_cell),
        ("comms_loopback", comms_loopback),
        ("pattern_spot_check", pattern_spot_check),
    ];
    let checks = checks
        .iter()
        .map(|&(name, f)| {
            let mut rng = stream(0x5e1f, Stream::SelfTest);
            let (passed, detail) = match f(&w, &mut rng) {
                Ok(r) => r,
                Err(e) => (false, e.to_string()),
            };
            Check {
                name,
                passed,
                detail,
            }
        })
        .collect();
    SelfTestReport { checks }
}

fn random_vec(n: usize, rng: &mut impl Rng) -> Vec<Complex64> {
    (0..n)
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect()
}

fn le(value: f64, bound: f64) -> (bool, String) {
    (value <= bound, format!("{value:.3e} (bound {bound:.0e})"))
}

fn dft_parseval(_: &Waveforms, rng: &mut rand_chacha::ChaCha8Rng) -> Result<(bool, String)> {
    let x = random_vec(1000, rng);
    let y = unitary_dft(&x)?;
    let back = unitary_idft(&y)?;
    let err = ((energy(&y) - energy(&x)) / energy(&x)).abs()
        + back
            .iter()
            .zip(&x)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
    Ok(le(err, 1e-12))
}

fn spectral_support(_: &Waveforms, rng: &mut rand_chacha::ChaCha8Rng) -> Result<(bool, String)> {
    let mut worst = 0.0f64;
    for m in [2, 4, 8] {
        for n in [64, 2048] {
            let cfg = WaveformConfig::with_grid(n, m);
            let chirp: Vec<Complex64> = (0..cfg.l_occ())
                .map(|_| Complex64::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU)))
                .collect();
            let base = make_base_set(&cfg, &chirp)?;
            for (row, x) in base.rows.iter().enumerate() {
                let spec = unitary_dft(x)?;
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
    Ok(le(worst, 1e-10))
}

fn code_unitarity(w: &Waveforms, _: &mut rand_chacha::ChaCha8Rng) -> Result<(bool, String)> {
    Ok(le(w.codes.unitarity_error(), 1e-12))
}

fn code_shift_identity(w: &Waveforms, _: &mut rand_chacha::ChaCha8Rng) -> Result<(bool, String)> {
    // rebuild the sensing waveforms from the (possibly faulty) code matrix
    let cfg = &w.cfg;
    let base = make_base_set(cfg, &w.chirp)?;
    let b = crate::waveform::make_sensing_waveforms(&base, &w.codes)?;
    let (n, m, l) = (cfg.n_fft, cfg.m_codes, cfg.l_occ());
    let mut worst = 0.0f64;
    for code in 0..m {
        let next = b.code((code + 1) % m);
        for i in 0..n {
            worst = worst.max((b.code(code)[(i + n - l) % n] - next[i]).norm());
        }
    }
    Ok(le(worst, 1e-12))
}

fn despread_roundtrip(w: &Waveforms, rng: &mut rand_chacha::ChaCha8Rng) -> Result<(bool, String)> {
    let cfg = &w.cfg;
    let l = cfg.l_occ();
    let data: Vec<Vec<Complex64>> = (0..cfg.m_codes - 1).map(|_| random_qpsk(l, rng)).collect();
    // spread with the exact codes, despread with the ones under test
    let exact = crate::waveform::make_code_matrix(cfg.m_codes)?;
    let sensing = cfg.m_codes - 1;
    let grid = spread_and_assemble(cfg, sensing, &w.chirp_spectrum, &data, &exact)?;
    let ds = despread(&grid.s, &w.codes, sensing)?;
    let err = ds
        .data
        .iter()
        .flatten()
        .zip(data.iter().flatten())
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    Ok(le(err, 1e-12))
}

fn si_cancellation(w: &Waveforms, rng: &mut rand_chacha::ChaCha8Rng) -> Result<(bool, String)> {
    let cfg = &w.cfg;
    let s = make_schedule(
        Scheme::FsiRandom,
        cfg.m_codes,
        8,
        RtdMode::Unconstrained,
        rng,
    )?;
    let tx = assemble_frame(w, &s, &random_qpsk(payload_len(cfg, &s), rng))?;
    let cc = ChannelConfig {
        noise_enabled: false,
        ..ChannelConfig::default()
    };
    let rx = synthesize_rx(&tx, &[], &cc, cfg, rng)?;
    // every folded beat must be constant
    let mut worst = 0.0f64;
    for k in 0..s.k {
        let win = &rx.samples[k * cfg.symbol_len() + cfg.n_cp..(k + 1) * cfg.symbol_len()];
        let y = delay_and_sum(&mix(win, w.sensing.code(s.alpha[k]))?, cfg.m_codes)?;
        let scale = y.iter().map(|v| v.norm()).fold(0.0, f64::max);
        worst = worst.max(y.iter().map(|v| (v - y[0]).norm()).fold(0.0, f64::max) / scale);
    }
    let rd = process_sensing(&rx, w, &s, WindowKind::Standard, &SensingOptions::default())?;
    let (ok1, d1) = le(worst, 1e-10);
    let (ok2, d2) = le(rd.max_power(), 1e-8);
    Ok((
        ok1 && ok2,
        format!("folded deviation {d1}; RD residue {d2}"),
    ))
}

fn matched_filter_oracle(
    _: &Waveforms,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Result<(bool, String)> {
    let (l, g) = (4, 24);
    let grid: Vec<usize> = (0..g).collect();
    let profiles: Vec<Vec<Complex64>> = (0..g).map(|_| random_vec(l, rng)).collect();
    let rd = slow_time_matched_filter(&profiles, &grid, g)?;
    let mut worst = 0.0f64;
    for d in 0..l {
        let col: Vec<Complex64> = profiles.iter().map(|p| p[d]).collect();
        let full = unitary_idft(&col)?;
        for nu in 0..g {
            worst = worst.max((rd.get(d, nu) - full[nu] / (g as f64).sqrt()).norm());
        }
    }
    Ok(le(worst, 1e-12))
}

fn on_grid_target_cell(w: &Waveforms, rng: &mut rand_chacha::ChaCha8Rng) -> Result<(bool, String)> {
    let cfg = &w.cfg;
    let k = 16;
    let s = make_schedule(
        Scheme::FsiRandom,
        cfg.m_codes,
        k,
        RtdMode::Unconstrained,
        rng,
    )?;
    let tx = assemble_frame(w, &s, &random_qpsk(payload_len(cfg, &s), rng))?;
    let g = occasion_grid_indices(&s, cfg)?.total;
    let axes = RdAxes::for_config(cfg, g);
    let (d, nu) = (11usize, -5i64);
    let t = Target::new(
        d as f64 * cfg.range_bin_m(),
        nu as f64 * axes.doppler_bin_hz * cfg.wavelength() / 2.0,
    );
    let rx = synthesize_rx(&tx, &[t], &ChannelConfig::clean(), cfg, rng)?;
    let rd = process_sensing(&rx, w, &s, WindowKind::Standard, &SensingOptions::default())?;
    let (mut best, mut cell) = (0.0, (0, 0));
    for (i, v) in rd.values.iter().enumerate() {
        if v.norm_sqr() > best {
            best = v.norm_sqr();
            cell = (i / rd.n_doppler, i % rd.n_doppler);
        }
    }
    let got = (cell.0, rd.signed_doppler(cell.1));
    Ok((
        got == (d, nu),
        format!("peak at {got:?}, expected {:?}", (d, nu)),
    ))
}

fn comms_loopback(w: &Waveforms, rng: &mut rand_chacha::ChaCha8Rng) -> Result<(bool, String)> {
    let cfg = &w.cfg;
    let s = make_schedule(
        Scheme::FsiRandom,
        cfg.m_codes,
        4,
        RtdMode::Unconstrained,
        rng,
    )?;
    let bits: Vec<u8> = (0..bits_per_frame(cfg, &s))
        .map(|_| rng.random_range(0..2u8))
        .collect();
    let rep = run_link(w, &s, &bits, &CommsLink::default(), rng)?;
    Ok((
        rep.bit_errors == 0,
        format!("{} errors in {} bits", rep.bit_errors, rep.bits),
    ))
}

fn pattern_spot_check(w: &Waveforms, _: &mut rand_chacha::ChaCha8Rng) -> Result<(bool, String)> {
    let p = build_pattern(w, 8, 1, 7)?;
    Ok((true, format!("max condition {:.1}", p.max_condition())))
}
