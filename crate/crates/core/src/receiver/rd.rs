use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::config::WaveformConfig;
use crate::error::{Error, Result};

/// Physical meaning of the matrix axes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RdAxes {
    pub range_bin_m: f64,
    pub doppler_bin_hz: f64,
    pub wavelength_m: f64,
    /// Added to every range index (`L` for the far map of the dual-window receiver).
    pub range_offset_bins: usize,
}

impl RdAxes {
    /// Axes for a map with `g` slow-time bins on one occasion (`T_chirp`) spacing.
    pub fn for_config(cfg: &WaveformConfig, g: usize) -> Self {
        Self {
            range_bin_m: cfg.range_bin_m(),
            doppler_bin_hz: 1.0 / (g as f64 * cfg.t_chirp()),
            wavelength_m: cfg.wavelength(),
            range_offset_bins: 0,
        }
    }
}

impl Default for RdAxes {
    fn default() -> Self {
        Self::for_config(&WaveformConfig::default(), 1)
    }
}

/// Range-Doppler matrix, row-major `[range][doppler]`.
///
/// Doppler columns use FFT order; [`RdMatrix::signed_doppler`] maps a column to
/// its signed bin in `[-G/2, G/2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RdMatrix {
    pub n_range: usize,
    pub n_doppler: usize,
    pub values: Vec<Complex64>,
    pub axes: RdAxes,
}

impl RdMatrix {
    pub fn zeros(n_range: usize, n_doppler: usize, axes: RdAxes) -> Self {
        Self {
            n_range,
            n_doppler,
            values: vec![Complex64::new(0.0, 0.0); n_range * n_doppler],
            axes,
        }
    }

    #[inline]
    pub fn get(&self, d: usize, nu: usize) -> Complex64 {
        self.values[d * self.n_doppler + nu]
    }

    #[inline]
    pub fn set(&mut self, d: usize, nu: usize, v: Complex64) {
        self.values[d * self.n_doppler + nu] = v;
    }

    #[inline]
    pub fn power(&self, d: usize, nu: usize) -> f64 {
        self.get(d, nu).norm_sqr()
    }

    pub fn row(&self, d: usize) -> &[Complex64] {
        &self.values[d * self.n_doppler..(d + 1) * self.n_doppler]
    }

    pub fn max_power(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).fold(0.0, f64::max)
    }

    /// Column index to signed Doppler bin in `[-G/2, G - G/2)`.
    pub fn signed_doppler(&self, nu: usize) -> i64 {
        signed_bin(nu, self.n_doppler)
    }

    /// Signed Doppler bin to column index.
    pub fn column(&self, signed: i64) -> usize {
        signed.rem_euclid(self.n_doppler as i64) as usize
    }

    pub fn doppler_hz(&self, nu: usize) -> f64 {
        self.signed_doppler(nu) as f64 * self.axes.doppler_bin_hz
    }

    pub fn velocity_mps(&self, nu: usize) -> f64 {
        self.doppler_hz(nu) * self.axes.wavelength_m / 2.0
    }

    pub fn range_m(&self, d: usize) -> f64 {
        (d + self.axes.range_offset_bins) as f64 * self.axes.range_bin_m
    }

    /// Zero every column outside the `band` bins centred on zero Doppler.
    pub fn restrict_band(&mut self, band: usize) {
        if band >= self.n_doppler {
            return;
        }
        let g = self.n_doppler;
        let keep: Vec<bool> = (0..g).map(|nu| in_band(signed_bin(nu, g), band)).collect();
        self.values.par_chunks_mut(g).for_each(|row| {
            row.iter_mut()
                .zip(&keep)
                .filter(|(_, k)| !**k)
                .for_each(|(v, _)| *v = Complex64::new(0.0, 0.0))
        });
    }

    /// Normalised magnitudes `|v| / max|v|`.
    pub fn normalized_magnitude(&self) -> Vec<f64> {
        let peak = self.max_power().sqrt();
        let scale = if peak > 0.0 { 1.0 / peak } else { 0.0 };
        self.values.iter().map(|v| v.norm() * scale).collect()
    }
}

pub(crate) fn signed_bin(nu: usize, g: usize) -> i64 {
    let half = (g / 2) as i64;
    (nu as i64 + half).rem_euclid(g as i64) - half
}

/// Signed bins `[-band/2, band - band/2)`.
pub(crate) fn in_band(signed: i64, band: usize) -> bool {
    let lo = -((band / 2) as i64);
    signed >= lo && signed < lo + band as i64
}

/// `RD[d, nu] = (1/K) sum_k p_k[d] e^{+j2pi g_k nu / G}`, computed as one
/// `G`-point inverse FFT per range bin.
pub fn slow_time_matched_filter(
    profiles: &[Vec<Complex64>],
    grid: &[usize],
    g_total: usize,
) -> Result<RdMatrix> {
    if profiles.is_empty() {
        return Err(Error::Empty("range profiles"));
    }
    if profiles.len() != grid.len() {
        return Err(Error::LengthMismatch {
            what: "occasion grid",
            expected: profiles.len(),
            actual: grid.len(),
        });
    }
    let l = profiles[0].len();
    if let Some(p) = profiles.iter().find(|p| p.len() != l) {
        return Err(Error::LengthMismatch {
            what: "range profile",
            expected: l,
            actual: p.len(),
        });
    }
    let mut seen = vec![false; g_total];
    for &g in grid {
        if g >= g_total {
            return Err(Error::InvalidArgument(format!(
                "grid index {g} >= G = {g_total}"
            )));
        }
        if std::mem::replace(&mut seen[g], true) {
            return Err(Error::DuplicateIndex(g));
        }
    }

    let k = profiles.len() as f64;
    let ifft: Arc<dyn Fft<f64>> = FftPlanner::new().plan_fft_inverse(g_total);
    let mut values = vec![Complex64::new(0.0, 0.0); l * g_total];
    values
        .par_chunks_mut(g_total)
        .enumerate()
        .for_each(|(d, row)| {
            for (p, &g) in profiles.iter().zip(grid) {
                row[g] += p[d];
            }
            ifft.process(row);
            row.iter_mut().for_each(|v| *v /= k);
        });
    Ok(RdMatrix {
        n_range: l,
        n_doppler: g_total,
        values,
        axes: RdAxes {
            doppler_bin_hz: 0.0,
            ..RdAxes::default()
        },
    })
}
