//! Data side of the waveforms: QPSK mapping, despreading and a loopback link with
//! a known flat channel.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::config::WaveformConfig;
use crate::dft::UnitaryFft;
use crate::error::{Error, Result};
use crate::scheduler::Schedule;
use crate::waveform::{assemble_frame, payload_len, CodeMatrix, Frame, FrameLayout, Waveforms};

/// Gray QPSK: bit 0 picks the sign of I, bit 1 the sign of Q, `0 -> +`.
pub fn modulate(bits: &[u8]) -> Result<Vec<Complex64>> {
    if !bits.len().is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!(
            "odd bit count {}",
            bits.len()
        )));
    }
    let a = std::f64::consts::FRAC_1_SQRT_2;
    let sign = |b: u8| if b == 0 { a } else { -a };
    Ok(bits
        .chunks(2)
        .map(|p| Complex64::new(sign(p[0]), sign(p[1])))
        .collect())
}

pub fn demodulate(symbols: &[Complex64]) -> Vec<u8> {
    symbols
        .iter()
        .flat_map(|s| [u8::from(s.re < 0.0), u8::from(s.im < 0.0)])
        .collect()
}

/// Despread outputs of one received symbol.
#[derive(Debug, Clone, PartialEq)]
pub struct Despread {
    /// One length-`L` stream per data code, ascending, sensing code skipped.
    pub data: Vec<Vec<Complex64>>,
    /// Despread with the sensing code; `sqrt(M)` times the chirp spectrum.
    pub sensing: Vec<Complex64>,
}

/// `d_i[g] = sum_k grid[gM + k] conj(u[i][k])` for every code `i`.
pub fn despread(grid: &[Complex64], codes: &CodeMatrix, sensing_code: usize) -> Result<Despread> {
    let m = codes.size();
    if grid.is_empty() || !grid.len().is_multiple_of(m) {
        return Err(Error::InvalidArgument(format!(
            "grid length {} is not a positive multiple of M = {m}",
            grid.len()
        )));
    }
    if sensing_code >= m {
        return Err(Error::InvalidArgument(format!(
            "sensing code {sensing_code} >= M = {m}"
        )));
    }
    let per_code: Vec<Vec<Complex64>> = (0..m)
        .map(|i| grid.chunks(m).map(|grp| codes.despread(i, grp)).collect())
        .collect();
    let mut data = Vec::with_capacity(m - 1);
    let mut sensing = Vec::new();
    for (i, v) in per_code.into_iter().enumerate() {
        if i == sensing_code {
            sensing = v;
        } else {
            data.push(v);
        }
    }
    Ok(Despread { data, sensing })
}

/// Parameters of the loopback data link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CommsLink {
    /// Flat complex channel gain, known to the receiver.
    pub gain: Complex64,
    /// Es/N0 in dB; the noise variance per time sample is `10^(-snr/10)`.
    /// `None` runs noiseless.
    pub snr_db: Option<f64>,
}

impl Default for CommsLink {
    fn default() -> Self {
        Self {
            gain: Complex64::new(1.0, 0.0),
            snr_db: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkReport {
    pub bits: usize,
    pub bit_errors: usize,
    pub ber: f64,
    /// RMS error vector over RMS reference symbol.
    pub evm: f64,
}

/// Bits carried by one frame for `schedule`.
pub fn bits_per_frame(cfg: &WaveformConfig, schedule: &Schedule) -> usize {
    2 * payload_len(cfg, schedule)
}

/// Send `bits` over as many frames of `schedule` as they fill, through
/// `y = gain * x + w`, and recover them.
pub fn run_link(
    w: &Waveforms,
    schedule: &Schedule,
    bits: &[u8],
    link: &CommsLink,
    rng: &mut impl Rng,
) -> Result<LinkReport> {
    let per_frame = bits_per_frame(&w.cfg, schedule);
    if per_frame == 0 || bits.is_empty() || !bits.len().is_multiple_of(per_frame) {
        return Err(Error::LengthMismatch {
            what: "link bits (multiple of bits per frame)",
            expected: per_frame,
            actual: bits.len(),
        });
    }
    if link.gain.norm() == 0.0 {
        return Err(Error::InvalidArgument(
            "channel gain must be nonzero".into(),
        ));
    }
    let sigma = link
        .snr_db
        .map(|snr| (10f64.powf(-snr / 10.0) / 2.0).sqrt());
    let (mut errors, mut err_energy, mut ref_energy) = (0usize, 0.0, 0.0);
    for chunk in bits.chunks(per_frame) {
        let sent = modulate(chunk)?;
        let tx = assemble_frame(w, schedule, &sent)?;
        let mut rx: Vec<Complex64> = tx.samples.iter().map(|x| x * link.gain).collect();
        if let Some(s) = sigma {
            for r in rx.iter_mut() {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                *r += Complex64::new(re, im) * s;
            }
        }
        let est = receive_data(w, schedule, &tx.with_samples(rx), link.gain)?;
        let got = demodulate(&est);
        errors += got.iter().zip(chunk).filter(|(a, b)| a != b).count();
        err_energy += est
            .iter()
            .zip(&sent)
            .map(|(e, s)| (e - s).norm_sqr())
            .sum::<f64>();
        ref_energy += sent.iter().map(|s| s.norm_sqr()).sum::<f64>();
    }
    Ok(LinkReport {
        bits: bits.len(),
        bit_errors: errors,
        ber: errors as f64 / bits.len() as f64,
        evm: (err_energy / ref_energy).sqrt(),
    })
}

/// Equalised data symbols of a received frame, in payload order.
pub fn receive_data(
    w: &Waveforms,
    schedule: &Schedule,
    rx: &Frame,
    gain: Complex64,
) -> Result<Vec<Complex64>> {
    let cfg = &w.cfg;
    let inv_gain = 1.0 / gain;
    let mut out = Vec::with_capacity(payload_len(cfg, schedule));
    match rx.layout {
        FrameLayout::Ofdm { .. } => {
            let fft = UnitaryFft::new(cfg.n_fft)?;
            let s = cfg.symbol_len();
            if rx.len() < schedule.k * s {
                return Err(Error::FrameTooShort {
                    needed: schedule.k * s,
                    available: rx.len(),
                });
            }
            for k in 0..schedule.k {
                let derotate = rx.rotations[k].conj() * inv_gain;
                let body: Vec<Complex64> = rx.samples[k * s + cfg.n_cp..(k + 1) * s]
                    .iter()
                    .map(|x| x * derotate)
                    .collect();
                let grid = fft.forward(&body)?;
                let ds = despread(&grid, &w.codes, schedule.alpha[k])?;
                out.extend(ds.data.into_iter().flatten());
            }
        }
        FrameLayout::Slotted { slot_len, n_slots } => {
            let fft = UnitaryFft::new(slot_len)?;
            let mut sensing = vec![false; n_slots];
            schedule.slots.iter().for_each(|&j| sensing[j] = true);
            for (j, is_sensing) in sensing.into_iter().enumerate() {
                if !is_sensing {
                    let slot = &rx.samples[j * slot_len..(j + 1) * slot_len];
                    out.extend(fft.forward(slot)?.into_iter().map(|x| x * inv_gain));
                }
            }
        }
    }
    Ok(out)
}
