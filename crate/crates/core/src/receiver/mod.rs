//! The FMCW sensing receiver.
//!
//! Per sensing occasion: capture a receive window, mix it with the reference
//! sensing waveform (`beat = reference * conj(window)`), fold the `M` occasions
//! together (delay-and-sum), drop the DC bins where all self-interference lands,
//! and take the fast-time spectrum. The range profiles of all occasions are then
//! combined by the slow-time matched filter on the physical occasion grid.
//!
//! With the mixing convention above an echo delayed by `d` samples shows up at
//! fast-time bin `+d`, and the matched filter steers with `e^{+j2pi g nu / G}` so a
//! positive Doppler lands on a positive signed Doppler bin.

mod pattern;
mod quantize;
mod rd;

pub use pattern::{
    build_pattern, peak_cleanup, solve_windows, CellState, PatternCell, PatternTensor,
    WindowSolution,
};
pub use quantize::{quantize, FullScale, Placement, Quantizer};
pub use rd::{slow_time_matched_filter, RdAxes, RdMatrix};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::WaveformConfig;
use crate::dft::UnitaryFft;
use crate::error::{Error, Result};
use crate::scheduler::{occasion_grid_indices, Schedule};
use crate::waveform::{Frame, FrameLayout, Waveforms};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowKind {
    /// The `N` body samples of each symbol (CP skipped).
    Standard,
    /// `N` samples starting at the CP, i.e. `n_cp` earlier than `Standard`.
    Shifted,
}

/// Fast-time spectrum of one sensing occasion.
#[derive(Debug, Clone, PartialEq)]
pub struct RangeProfile {
    pub values: Vec<Complex64>,
    pub symbol: usize,
    pub window: WindowKind,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensingOptions {
    /// Fast-time bins `[0, n_guard)` removed by the SI filter.
    pub n_guard: usize,
    pub quantizer: Option<Quantizer>,
}

impl Default for SensingOptions {
    fn default() -> Self {
        Self {
            n_guard: 1,
            quantizer: None,
        }
    }
}

/// One length-`N` window per FSI symbol.
pub fn capture_windows(
    rx: &Frame,
    cfg: &WaveformConfig,
    schedule: &Schedule,
    kind: WindowKind,
) -> Result<Vec<Vec<Complex64>>> {
    if !matches!(rx.layout, FrameLayout::Ofdm { .. }) {
        return Err(Error::Schedule("receive windows need an OFDM frame".into()));
    }
    let s = cfg.symbol_len();
    let needed = schedule.k * s;
    if rx.len() < needed {
        return Err(Error::FrameTooShort {
            needed,
            available: rx.len(),
        });
    }
    let offset = match kind {
        WindowKind::Standard => cfg.n_cp,
        WindowKind::Shifted => 0,
    };
    Ok((0..schedule.k)
        .map(|k| rx.samples[k * s + offset..k * s + offset + cfg.n_fft].to_vec())
        .collect())
}

/// `reference * conj(window)`, sample by sample.
pub fn mix(window: &[Complex64], reference: &[Complex64]) -> Result<Vec<Complex64>> {
    if window.len() != reference.len() {
        return Err(Error::LengthMismatch {
            what: "mixer input",
            expected: reference.len(),
            actual: window.len(),
        });
    }
    Ok(reference
        .iter()
        .zip(window)
        .map(|(r, x)| r * x.conj())
        .collect())
}

/// `out[l] = sum_q beat[q L + l]` with `L = len / m`.
pub fn delay_and_sum(beat: &[Complex64], m: usize) -> Result<Vec<Complex64>> {
    if m == 0 || !beat.len().is_multiple_of(m) {
        return Err(Error::InvalidArgument(format!(
            "beat length {} is not a multiple of {m}",
            beat.len()
        )));
    }
    let l = beat.len() / m;
    let mut out = vec![Complex64::new(0.0, 0.0); l];
    for chunk in beat.chunks(l) {
        for (o, x) in out.iter_mut().zip(chunk) {
            *o += x;
        }
    }
    Ok(out)
}

/// Unitary fast-time DFT.
pub fn fast_time_fft(y: &[Complex64]) -> Result<Vec<Complex64>> {
    UnitaryFft::new(y.len())?.forward(y)
}

/// Fast-time spectrum with bins `[0, n_guard)` zeroed; the digital stand-in for
/// the analog high-pass after the mixer.
pub fn si_filter(y: &[Complex64], n_guard: usize) -> Result<Vec<Complex64>> {
    let fft = UnitaryFft::new(y.len())?;
    si_filter_with(&fft, y, n_guard)
}

fn si_filter_with(fft: &UnitaryFft, y: &[Complex64], n_guard: usize) -> Result<Vec<Complex64>> {
    if n_guard == 0 || n_guard >= y.len() {
        return Err(Error::InvalidArgument(format!(
            "n_guard must be in [1, {}), got {n_guard}",
            y.len()
        )));
    }
    let mut spec = fft.forward(y)?;
    spec[..n_guard]
        .iter_mut()
        .for_each(|x| *x = Complex64::new(0.0, 0.0));
    Ok(spec)
}

/// Sensing code the receiver mixes against for symbol `alpha` in `kind`.
///
/// The shifted window is the body cyclically delayed by `n_cp`, which turns code
/// `m` into code `m + n_cp/L`.
pub fn reference_code(cfg: &WaveformConfig, alpha: usize, kind: WindowKind) -> usize {
    match kind {
        WindowKind::Standard => alpha,
        WindowKind::Shifted => (alpha + cfg.cp_occasions()) % cfg.m_codes,
    }
}

/// Full receive chain from a received frame to a range-Doppler map.
pub fn process_sensing(
    rx: &Frame,
    w: &Waveforms,
    schedule: &Schedule,
    kind: WindowKind,
    opts: &SensingOptions,
) -> Result<RdMatrix> {
    schedule.validate()?;
    if rx.scheme != schedule.scheme {
        return Err(Error::Schedule(format!(
            "frame scheme {:?} does not match schedule {:?}",
            rx.scheme, schedule.scheme
        )));
    }
    let cfg = &w.cfg;
    let l = cfg.l_occ();
    let folded = if schedule.scheme.is_fsi() {
        fsi_folded(rx, w, schedule, kind, opts)?
    } else {
        if kind != WindowKind::Standard {
            return Err(Error::Schedule(
                "slotted frames have no shifted window".into(),
            ));
        }
        slotted_beats(rx, w, schedule, opts)?
    };

    let fft = UnitaryFft::new(l)?;
    let profiles: Vec<Vec<Complex64>> = folded
        .par_iter()
        .map(|y| si_filter_with(&fft, y, opts.n_guard))
        .collect::<Result<_>>()?;

    let grid = occasion_grid_indices(schedule, cfg)?;
    let mut rd = slow_time_matched_filter(&profiles, &grid.indices, grid.total)?;
    rd.axes = RdAxes::for_config(cfg, grid.total);
    if let Some(period) = schedule.slow_time_period(cfg) {
        rd.restrict_band(grid.total / period);
    }
    Ok(rd)
}

/// Delay-and-summed beat of every FSI symbol, before the SI filter.
fn fsi_folded(
    rx: &Frame,
    w: &Waveforms,
    schedule: &Schedule,
    kind: WindowKind,
    opts: &SensingOptions,
) -> Result<Vec<Vec<Complex64>>> {
    let cfg = &w.cfg;
    let mut rx = std::borrow::Cow::Borrowed(rx);
    if let Some(q) = opts.quantizer.filter(|q| q.placement == Placement::RawRx) {
        rx = std::borrow::Cow::Owned(rx.with_samples(q.apply(&rx.samples)?));
    }
    if rx.rotations.len() < schedule.k {
        return Err(Error::Schedule(
            "frame carries fewer symbols than the schedule".into(),
        ));
    }
    let windows = capture_windows(&rx, cfg, schedule, kind)?;
    let mut folded: Vec<Vec<Complex64>> = windows
        .par_iter()
        .enumerate()
        .map(|(k, win)| {
            let code = reference_code(cfg, schedule.alpha[k], kind);
            let rho = rx.rotations[k];
            let reference: Vec<Complex64> = w.sensing.code(code).iter().map(|x| x * rho).collect();
            delay_and_sum(&mix(win, &reference)?, cfg.m_codes)
        })
        .collect::<Result<_>>()?;
    if let Some(q) = opts
        .quantizer
        .filter(|q| q.placement == Placement::AfterCancellation)
    {
        quantize_after_cancellation(&mut folded, &q)?;
    }
    Ok(folded)
}

fn slotted_beats(
    rx: &Frame,
    w: &Waveforms,
    schedule: &Schedule,
    opts: &SensingOptions,
) -> Result<Vec<Vec<Complex64>>> {
    let l = w.cfg.l_occ();
    let needed = schedule.total_slots() * l;
    if rx.len() < needed {
        return Err(Error::FrameTooShort {
            needed,
            available: rx.len(),
        });
    }
    let mut rx = std::borrow::Cow::Borrowed(rx);
    if let Some(q) = opts.quantizer.filter(|q| q.placement == Placement::RawRx) {
        rx = std::borrow::Cow::Owned(rx.with_samples(q.apply(&rx.samples)?));
    }
    let mut beats: Vec<Vec<Complex64>> = schedule
        .slots
        .iter()
        .map(|&j| mix(&rx.samples[j * l..(j + 1) * l], &w.chirp))
        .collect::<Result<_>>()?;
    if let Some(q) = opts
        .quantizer
        .filter(|q| q.placement == Placement::AfterCancellation)
    {
        quantize_after_cancellation(&mut beats, &q)?;
    }
    Ok(beats)
}

/// Analog DC removal followed by the ADC, with one full-scale setting for the
/// whole frame.
fn quantize_after_cancellation(blocks: &mut [Vec<Complex64>], q: &Quantizer) -> Result<()> {
    for b in blocks.iter_mut() {
        let mean = b.iter().sum::<Complex64>() / b.len() as f64;
        b.iter_mut().for_each(|x| *x -= mean);
    }
    let all: Vec<Complex64> = blocks.iter().flatten().copied().collect();
    let fs = q.full_scale.resolve(&all);
    for b in blocks.iter_mut() {
        *b = quantize(b, q.bits, fs)?;
    }
    Ok(())
}
