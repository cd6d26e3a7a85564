use num_complex::Complex64;

use crate::config::WaveformConfig;
use crate::dft::unit_phasor;
use crate::error::{Error, Result};

/// The shifted base set: row `m` is the M-fold tiled chirp modulated by
/// `r_m[n] = e^{j2pi mn/N}`. Its spectrum lives only on subcarriers `≡ m (mod M)`.
#[derive(Debug, Clone)]
pub struct BaseSet {
    pub rows: Vec<Vec<Complex64>>,
}

pub fn make_base_set(cfg: &WaveformConfig, chirp: &[Complex64]) -> Result<BaseSet> {
    let (n, m, l) = (cfg.n_fft, cfg.m_codes, cfg.l_occ());
    if chirp.len() != l {
        return Err(Error::LengthMismatch {
            what: "chirp",
            expected: l,
            actual: chirp.len(),
        });
    }
    let rows = (0..m)
        .map(|row| {
            (0..n)
                .map(|i| chirp[i % l] * unit_phasor((row * i) as i64, n as u64))
                .collect()
        })
        .collect();
    Ok(BaseSet { rows })
}

/// DFT-like spreading codes with a half-bin phase ramp:
/// `u[m][k] = M^{-1/2} e^{-j2pi mk/M} e^{-j pi k/M}`.
///
/// Row `m`, applied across `M` consecutive subcarriers, concentrates the implanted
/// chirp in time occasion `m` of the symbol.
#[derive(Debug, Clone, PartialEq)]
pub struct CodeMatrix {
    m: usize,
    u: Vec<Complex64>,
}

pub fn make_code_matrix(m: usize) -> Result<CodeMatrix> {
    if m == 0 {
        return Err(Error::InvalidArgument(
            "code matrix size must be >= 1".into(),
        ));
    }
    let scale = 1.0 / (m as f64).sqrt();
    let mut u = Vec::with_capacity(m * m);
    for row in 0..m {
        for k in 0..m {
            // -(2 m k + k) / (2M) cycles
            u.push(unit_phasor(-((2 * row * k + k) as i64), 2 * m as u64) * scale);
        }
    }
    Ok(CodeMatrix { m, u })
}

impl CodeMatrix {
    pub fn size(&self) -> usize {
        self.m
    }

    pub fn get(&self, row: usize, k: usize) -> Complex64 {
        self.u[row * self.m + k]
    }

    pub fn row(&self, row: usize) -> &[Complex64] {
        &self.u[row * self.m..(row + 1) * self.m]
    }

    /// Overwrite one entry. Used by the self-test to inject faults.
    pub fn set(&mut self, row: usize, k: usize, value: Complex64) {
        self.u[row * self.m + k] = value;
    }

    /// Largest entry of `|U U^H - I|`.
    pub fn unitarity_error(&self) -> f64 {
        let mut worst = 0.0f64;
        for a in 0..self.m {
            for b in 0..self.m {
                let dot: Complex64 = self
                    .row(a)
                    .iter()
                    .zip(self.row(b))
                    .map(|(x, y)| x * y.conj())
                    .sum();
                let target = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((dot - target).norm());
            }
        }
        worst
    }

    /// Inner product of `values` (one subcarrier group) with `conj(u[row])`.
    pub fn despread(&self, row: usize, values: &[Complex64]) -> Complex64 {
        values
            .iter()
            .zip(self.row(row))
            .map(|(v, u)| v * u.conj())
            .sum()
    }
}

/// Per-code time-domain sensing waveforms `b[m] = sum_i u[m][i] x_Ci`.
#[derive(Debug, Clone)]
pub struct SensingWaveforms {
    pub b: Vec<Vec<Complex64>>,
}

pub fn make_sensing_waveforms(base: &BaseSet, codes: &CodeMatrix) -> Result<SensingWaveforms> {
    let m = codes.size();
    if base.rows.len() != m {
        return Err(Error::LengthMismatch {
            what: "base set rows",
            expected: m,
            actual: base.rows.len(),
        });
    }
    let n = base.rows[0].len();
    let b = (0..m)
        .map(|row| {
            let mut acc = vec![Complex64::new(0.0, 0.0); n];
            for (i, base_row) in base.rows.iter().enumerate() {
                let w = codes.get(row, i);
                for (a, x) in acc.iter_mut().zip(base_row) {
                    *a += w * x;
                }
            }
            acc
        })
        .collect();
    Ok(SensingWaveforms { b })
}

impl SensingWaveforms {
    pub fn code(&self, m: usize) -> &[Complex64] {
        &self.b[m]
    }

    /// Energy of `b[m]` in each of the `M` occasions.
    pub fn occasion_energy(&self, m: usize, l_occ: usize) -> Vec<f64> {
        self.b[m]
            .chunks(l_occ)
            .map(|c| c.iter().map(|x| x.norm_sqr()).sum())
            .collect()
    }
}

/// One frequency-domain OFDM symbol viewed as `N/M` groups of `M` subcarriers.
#[derive(Debug, Clone, PartialEq)]
pub struct FreqGrid {
    pub s: Vec<Complex64>,
    pub m_codes: usize,
}

impl FreqGrid {
    pub fn n_groups(&self) -> usize {
        self.s.len() / self.m_codes
    }

    pub fn group(&self, g: usize) -> &[Complex64] {
        &self.s[g * self.m_codes..(g + 1) * self.m_codes]
    }
}

/// Build the spread symbol
/// `s[gM + k] = scale sqrt(M) P[g] u[m][k] + sum_{i != m} d_i[g] u[i][k]`.
///
/// `data` holds one length-`L` vector per non-sensing code, in ascending code
/// order with `sensing_code` skipped.
pub fn spread_and_assemble(
    cfg: &WaveformConfig,
    sensing_code: usize,
    chirp_spectrum: &[Complex64],
    data: &[Vec<Complex64>],
    codes: &CodeMatrix,
) -> Result<FreqGrid> {
    let (m, l) = (cfg.m_codes, cfg.l_occ());
    if sensing_code >= m {
        return Err(Error::InvalidArgument(format!(
            "sensing code {sensing_code} out of range for M = {m}"
        )));
    }
    if codes.size() != m {
        return Err(Error::LengthMismatch {
            what: "code matrix",
            expected: m,
            actual: codes.size(),
        });
    }
    if chirp_spectrum.len() != l {
        return Err(Error::LengthMismatch {
            what: "chirp spectrum",
            expected: l,
            actual: chirp_spectrum.len(),
        });
    }
    if data.len() != m - 1 {
        return Err(Error::LengthMismatch {
            what: "data streams",
            expected: m - 1,
            actual: data.len(),
        });
    }
    if let Some(bad) = data.iter().find(|d| d.len() != l) {
        return Err(Error::LengthMismatch {
            what: "data stream",
            expected: l,
            actual: bad.len(),
        });
    }

    let data_codes: Vec<usize> = (0..m).filter(|&i| i != sensing_code).collect();
    let gain = cfg.sensing_scale * (m as f64).sqrt();
    let mut s = vec![Complex64::new(0.0, 0.0); cfg.n_fft];
    for (g, chunk) in s.chunks_mut(m).enumerate() {
        let p = chirp_spectrum[g] * gain;
        for (k, slot) in chunk.iter_mut().enumerate() {
            let mut v = p * codes.get(sensing_code, k);
            for (stream, &code) in data.iter().zip(&data_codes) {
                v += stream[g] * codes.get(code, k);
            }
            *slot = v;
        }
    }
    Ok(FreqGrid { s, m_codes: m })
}
