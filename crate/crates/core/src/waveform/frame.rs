use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{spread_and_assemble, FreqGrid, Waveforms};
use crate::config::WaveformConfig;
use crate::dft::{unit_phasor, UnitaryFft};
use crate::error::{Error, Result};
use crate::scheduler::{Schedule, Scheme};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameLayout {
    /// `n_slots` back-to-back occasions of `slot_len` samples, no CP.
    Slotted { slot_len: usize, n_slots: usize },
    /// `n_symbols` OFDM symbols of `n_fft + n_cp` samples each.
    Ofdm {
        n_fft: usize,
        n_cp: usize,
        n_symbols: usize,
    },
}

impl FrameLayout {
    pub fn len(&self) -> usize {
        match *self {
            FrameLayout::Slotted { slot_len, n_slots } => slot_len * n_slots,
            FrameLayout::Ofdm {
                n_fft,
                n_cp,
                n_symbols,
            } => (n_fft + n_cp) * n_symbols,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A complex baseband sample stream with its layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub samples: Vec<Complex64>,
    pub layout: FrameLayout,
    pub scheme: Scheme,
    /// Per-symbol rotation applied at the transmitter (all ones unless FsiTail).
    pub rotations: Vec<Complex64>,
}

impl Frame {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn mean_power(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.samples.iter().map(|x| x.norm_sqr()).sum::<f64>() / self.samples.len() as f64
    }

    /// Same layout, different samples.
    pub fn with_samples(&self, samples: Vec<Complex64>) -> Frame {
        Frame {
            samples,
            layout: self.layout,
            scheme: self.scheme,
            rotations: self.rotations.clone(),
        }
    }
}

/// `e^{j2pi k/M}` when `rotate`, else 1.
pub fn rotation(k: usize, m_codes: usize, rotate: bool) -> Complex64 {
    if rotate {
        unit_phasor(k as i64, m_codes as u64)
    } else {
        Complex64::new(1.0, 0.0)
    }
}

/// Time-domain symbol with the rotation applied to the body and a CP copied from
/// the rotated tail.
pub fn assemble_symbol(
    grid: &FreqGrid,
    cfg: &WaveformConfig,
    symbol_index: usize,
    rotate: bool,
) -> Result<Vec<Complex64>> {
    let fft = UnitaryFft::new(cfg.n_fft)?;
    assemble_symbol_with(&fft, grid, cfg, symbol_index, rotate)
}

fn assemble_symbol_with(
    fft: &UnitaryFft,
    grid: &FreqGrid,
    cfg: &WaveformConfig,
    symbol_index: usize,
    rotate: bool,
) -> Result<Vec<Complex64>> {
    let mut body = fft.inverse(&grid.s)?;
    let rho = rotation(symbol_index, cfg.m_codes, rotate);
    body.iter_mut().for_each(|x| *x *= rho);
    let mut out = Vec::with_capacity(cfg.symbol_len());
    out.extend_from_slice(&body[cfg.n_fft - cfg.n_cp..]);
    out.extend_from_slice(&body);
    Ok(out)
}

/// Number of data symbols a frame for `schedule` carries.
pub fn payload_len(cfg: &WaveformConfig, schedule: &Schedule) -> usize {
    let l = cfg.l_occ();
    if schedule.scheme.is_fsi() {
        schedule.k * (cfg.m_codes - 1) * l
    } else {
        (schedule.total_slots() - schedule.slots.len()) * l
    }
}

/// Unit-power Gray QPSK symbols with uniformly random bits.
pub fn random_qpsk(count: usize, rng: &mut impl Rng) -> Vec<Complex64> {
    let a = std::f64::consts::FRAC_1_SQRT_2;
    (0..count)
        .map(|_| {
            let i = if rng.random::<bool>() { -a } else { a };
            let q = if rng.random::<bool>() { -a } else { a };
            Complex64::new(i, q)
        })
        .collect()
}

/// Build the transmit frame for `schedule`.
///
/// FSI schemes: `K` symbols, sensing code `alpha[k]`, data on the other codes.
/// Slotted schemes: a chirp in every scheduled slot and a CP-less `L`-point OFDM
/// data symbol in every other slot.
pub fn assemble_frame(w: &Waveforms, schedule: &Schedule, payload: &[Complex64]) -> Result<Frame> {
    let cfg = &w.cfg;
    if schedule.m_codes != cfg.m_codes {
        return Err(Error::Schedule(format!(
            "schedule built for M = {}, waveform has M = {}",
            schedule.m_codes, cfg.m_codes
        )));
    }
    let expected = payload_len(cfg, schedule);
    if payload.len() != expected {
        return Err(Error::LengthMismatch {
            what: "payload",
            expected,
            actual: payload.len(),
        });
    }
    if schedule.scheme.is_fsi() {
        assemble_fsi(w, schedule, payload)
    } else {
        assemble_slotted(w, schedule, payload)
    }
}

fn assemble_fsi(w: &Waveforms, schedule: &Schedule, payload: &[Complex64]) -> Result<Frame> {
    let cfg = &w.cfg;
    let (m, l) = (cfg.m_codes, cfg.l_occ());
    let rotate = schedule.scheme.uses_rotation();
    let fft = UnitaryFft::new(cfg.n_fft)?;
    let per_symbol = (m - 1) * l;

    let symbols: Vec<Vec<Complex64>> = schedule
        .alpha
        .par_iter()
        .enumerate()
        .map(|(k, &alpha)| {
            let chunk = &payload[k * per_symbol..(k + 1) * per_symbol];
            let data: Vec<Vec<Complex64>> = chunk.chunks(l).map(|c| c.to_vec()).collect();
            let grid = spread_and_assemble(cfg, alpha, &w.chirp_spectrum, &data, &w.codes)?;
            assemble_symbol_with(&fft, &grid, cfg, k, rotate)
        })
        .collect::<Result<_>>()?;

    Ok(Frame {
        samples: symbols.concat(),
        layout: FrameLayout::Ofdm {
            n_fft: cfg.n_fft,
            n_cp: cfg.n_cp,
            n_symbols: schedule.k,
        },
        scheme: schedule.scheme,
        rotations: (0..schedule.k).map(|k| rotation(k, m, rotate)).collect(),
    })
}

fn assemble_slotted(w: &Waveforms, schedule: &Schedule, payload: &[Complex64]) -> Result<Frame> {
    let l = w.cfg.l_occ();
    let n_slots = schedule.total_slots();
    let fft = UnitaryFft::new(l)?;
    let mut sensing = vec![false; n_slots];
    for &s in &schedule.slots {
        sensing[s] = true;
    }
    let mut samples = Vec::with_capacity(n_slots * l);
    let mut data = payload.chunks(l);
    for is_sensing in sensing {
        if is_sensing {
            samples.extend_from_slice(&w.chirp);
        } else {
            let chunk = data.next().expect("payload length checked");
            samples.extend(fft.inverse(chunk)?);
        }
    }
    Ok(Frame {
        samples,
        layout: FrameLayout::Slotted {
            slot_len: l,
            n_slots,
        },
        scheme: schedule.scheme,
        rotations: vec![Complex64::new(1.0, 0.0); schedule.k],
    })
}
