//! Dual-window range extension for `FsiTail` frames.
//!
//! An echo at delay `d0` (near) and one at `d0 + L` (far) land on the same
//! fast-time bin of both receive windows, but with different complex gains.
//! For each cell the 2x2 gain matrix `A[window][hypothesis]` is computed from the
//! transmit waveform, and the two window maps are separated by applying `A^{-1}`.
//!
//! The gains depend on the range bin (the truncated overlap with the current
//! symbol shrinks as `d0` grows) and on the Doppler bin (intra-symbol phase
//! drift), so one matrix is stored per cell.

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;

use super::rd::{in_band, signed_bin};
use super::{process_sensing, RdMatrix, SensingOptions, WindowKind};
use crate::channel::{synthesize_rx, ChannelConfig, Target};
use crate::dft::unit_phasor;
use crate::error::{Error, Result};
use crate::rng::{stream, Stream};
use crate::scheduler::{make_schedule, RtdMode, Schedule, Scheme};
use crate::waveform::{assemble_frame, payload_len, Waveforms};

/// Condition number above which a cell cannot be separated.
pub const MAX_CONDITION: f64 = 1e6;
/// Relative tolerance of the spot check against the full receive chain.
pub const SPOT_TOLERANCE: f64 = 1e-6;
const SPOT_CHECKS: usize = 3;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellState {
    Ok,
    /// Removed by the SI filter; nothing to separate.
    Filtered,
    Unresolvable,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatternCell {
    /// `p[hypothesis][window]`: response of window (standard, shifted) to a unit
    /// target at the near (`d0`) or far (`d0 + L`) delay.
    pub p: [[Complex64; 2]; 2],
    /// Rows (near, far) of the inverse of `A = p^T`, each scaled to unit norm.
    pub p_sol: [[Complex64; 2]; 2],
    pub cond: f64,
    pub state: CellState,
}

impl PatternCell {
    pub fn from_p(p: [[Complex64; 2]; 2], filtered: bool) -> Self {
        let mut cell = Self {
            p,
            p_sol: [[ZERO; 2]; 2],
            cond: f64::INFINITY,
            state: if filtered {
                CellState::Filtered
            } else {
                CellState::Unresolvable
            },
        };
        if filtered {
            return cell;
        }
        // A[w][h] = p[h][w]
        let (a00, a01, a10, a11) = (p[0][0], p[1][0], p[0][1], p[1][1]);
        let det = a00 * a11 - a01 * a10;
        cell.cond = condition_2x2([a00, a01, a10, a11]);
        if det.norm() == 0.0 || !(cell.cond <= MAX_CONDITION) {
            return cell;
        }
        let inv = [[a11 / det, -a01 / det], [-a10 / det, a00 / det]];
        for (dst, row) in cell.p_sol.iter_mut().zip(inv) {
            let norm = (row[0].norm_sqr() + row[1].norm_sqr()).sqrt();
            *dst = [row[0] / norm, row[1] / norm];
        }
        cell.state = CellState::Ok;
        cell
    }
}

/// `sigma_max / sigma_min` of a 2x2 matrix given row-major.
fn condition_2x2(a: [Complex64; 4]) -> f64 {
    let fro: f64 = a.iter().map(|x| x.norm_sqr()).sum();
    let det = (a[0] * a[3] - a[1] * a[2]).norm();
    if det == 0.0 {
        return f64::INFINITY;
    }
    let disc = (fro * fro - 4.0 * det * det).max(0.0).sqrt();
    let s_max_sq = (fro + disc) / 2.0;
    s_max_sq / det
}

/// Gain matrices for every range bin and every in-band Doppler bin.
#[derive(Debug, Clone, PartialEq)]
pub struct PatternTensor {
    /// `L`.
    pub n_range: usize,
    /// `G`, the slow-time length of the maps this applies to.
    pub n_doppler: usize,
    /// Signed Doppler bin of the first band column.
    pub band_lo: i64,
    pub band_len: usize,
    pub n_guard: usize,
    /// Row-major `[range][band column]`.
    pub cells: Vec<PatternCell>,
}

impl PatternTensor {
    pub fn from_p(
        n_range: usize,
        n_doppler: usize,
        band_len: usize,
        n_guard: usize,
        p: &[[[Complex64; 2]; 2]],
    ) -> Result<Self> {
        if p.len() != n_range * band_len {
            return Err(Error::LengthMismatch {
                what: "pattern cells",
                expected: n_range * band_len,
                actual: p.len(),
            });
        }
        let cells = p
            .iter()
            .enumerate()
            .map(|(i, &pc)| PatternCell::from_p(pc, i / band_len < n_guard))
            .collect();
        Ok(Self {
            n_range,
            n_doppler,
            band_lo: -((band_len / 2) as i64),
            band_len,
            n_guard,
            cells,
        })
    }

    /// Cell for range bin `d` and signed Doppler bin `nu`, if in band.
    pub fn cell(&self, d: usize, signed_nu: i64) -> Option<&PatternCell> {
        if d >= self.n_range || !in_band(signed_nu, self.band_len) {
            return None;
        }
        let b = (signed_nu - self.band_lo) as usize;
        Some(&self.cells[d * self.band_len + b])
    }

    pub fn unresolvable_count(&self) -> usize {
        self.cells
            .iter()
            .filter(|c| c.state == CellState::Unresolvable)
            .count()
    }

    pub fn max_condition(&self) -> f64 {
        self.cells
            .iter()
            .filter(|c| c.state == CellState::Ok)
            .map(|c| c.cond)
            .fold(0.0, f64::max)
    }
}

/// Compute the pattern for a `K`-symbol `FsiTail` frame, then check three random
/// cells against the full transmit/channel/receive chain.
pub fn build_pattern(w: &Waveforms, k: usize, n_guard: usize, seed: u64) -> Result<PatternTensor> {
    let cfg = &w.cfg;
    let (n, l, m) = (cfg.n_fft, cfg.l_occ(), cfg.m_codes);
    if k < 2 {
        return Err(Error::InvalidArgument("pattern needs K >= 2".into()));
    }
    if n_guard == 0 || n_guard >= l {
        return Err(Error::InvalidArgument(format!(
            "n_guard must be in [1, {l})"
        )));
    }
    if cfg.n_cp != l {
        return Err(Error::Config(format!(
            "dual-window separation needs n_cp = L ({l}), got {}",
            cfg.n_cp
        )));
    }
    let cp = cfg.cp_occasions();
    let per = m + cp;
    let g = k * per;
    let band_len = k;
    let band_lo = -((band_len / 2) as i64);
    let alpha = m - 1;

    // One unrotated sensing-only symbol, CP included.
    let single = tail_schedule(m, 1)?;
    let t = assemble_frame(w, &single, &vec![ZERO; payload_len(cfg, &single)])?.samples;
    let s_len = t.len();
    let beta = unit_phasor(1, m as u64);
    let gl = (g * l) as u64;
    let table: Vec<Complex64> = (0..gl).map(|i| unit_phasor(-(i as i64), gl)).collect();
    let inv_sqrt_l = 1.0 / (l as f64).sqrt();

    let windows = [WindowKind::Standard, WindowKind::Shifted];
    let refs: Vec<&[Complex64]> = windows
        .iter()
        .map(|&kind| w.sensing.code(super::reference_code(cfg, alpha, kind)))
        .collect();

    let p: Vec<[[Complex64; 2]; 2]> = (0..l)
        .into_par_iter()
        .flat_map_iter(|d0| {
            let mut out = vec![[[ZERO; 2]; 2]; band_len];
            if d0 < n_guard {
                return out;
            }
            let mut cur = vec![ZERO; n];
            let mut prev = vec![ZERO; n];
            for h in 0..2 {
                let d = (d0 + h * l) as i64;
                for (wi, &kind) in windows.iter().enumerate() {
                    let o = if kind == WindowKind::Standard {
                        cfg.n_cp
                    } else {
                        0
                    } as i64;
                    for i in 0..n {
                        let j = o + i as i64 - d;
                        let r = refs[wi][i];
                        if j >= 0 {
                            cur[i] = r * t[j as usize].conj();
                            prev[i] = ZERO;
                        } else {
                            cur[i] = ZERO;
                            prev[i] = r * t[(s_len as i64 + j) as usize].conj();
                        }
                    }
                    for (b, slot) in out.iter_mut().enumerate() {
                        let nu_s = band_lo + b as i64;
                        let step = ((d0 as i64 * g as i64 + nu_s).rem_euclid(gl as i64)) as u64;
                        let (mut a_cur, mut a_prev) = (ZERO, ZERO);
                        let mut idx = 0u64;
                        for i in 0..n {
                            let ph = table[idx as usize];
                            a_cur += cur[i] * ph;
                            a_prev += prev[i] * ph;
                            idx += step;
                            if idx >= gl {
                                idx -= gl;
                            }
                        }
                        a_cur *= inv_sqrt_l;
                        a_prev *= inv_sqrt_l;
                        let full = a_cur + beta * a_prev;
                        let nu = nu_s.rem_euclid(g as i64);
                        let ramp = unit_phasor(-nu_s * o, gl)
                            * unit_phasor((cp + alpha) as i64 * nu, g as u64);
                        slot[h][wi] = ramp * (a_cur + full * (k - 1) as f64) / k as f64;
                    }
                }
            }
            out
        })
        .collect();

    let tensor = PatternTensor::from_p(l, g, band_len, n_guard, &p)?;
    spot_check(w, k, &tensor, seed)?;
    Ok(tensor)
}

fn tail_schedule(m: usize, k: usize) -> Result<Schedule> {
    make_schedule(
        Scheme::FsiTail,
        m,
        k,
        RtdMode::Unconstrained,
        &mut stream(0, Stream::Calibration),
    )
}

fn spot_check(w: &Waveforms, k: usize, tensor: &PatternTensor, seed: u64) -> Result<()> {
    let cfg = &w.cfg;
    let l = cfg.l_occ();
    let schedule = tail_schedule(cfg.m_codes, k)?;
    let tx = assemble_frame(w, &schedule, &vec![ZERO; payload_len(cfg, &schedule)])?;
    let mut rng = stream(seed, Stream::Calibration);
    let opts = SensingOptions {
        n_guard: tensor.n_guard,
        quantizer: None,
    };
    let doppler_bin_hz = 1.0 / (tensor.n_doppler as f64 * cfg.t_chirp());
    for _ in 0..SPOT_CHECKS {
        let d0 = rng.random_range(tensor.n_guard..l);
        let h = rng.random_range(0..2usize);
        let nu_s = tensor.band_lo + rng.random_range(0..tensor.band_len) as i64;
        let range = (d0 + h * l) as f64 * cfg.range_bin_m();
        let velocity = nu_s as f64 * doppler_bin_hz * cfg.wavelength() / 2.0;
        let rx = synthesize_rx(
            &tx,
            &[Target::new(range, velocity)],
            &ChannelConfig::clean(),
            cfg,
            &mut rng,
        )?;
        let cell = tensor.cell(d0, nu_s).expect("in band");
        for (wi, kind) in [WindowKind::Standard, WindowKind::Shifted]
            .into_iter()
            .enumerate()
        {
            let rd = process_sensing(&rx, w, &schedule, kind, &opts)?;
            let got = rd.get(d0, rd.column(nu_s));
            let want = cell.p[h][wi];
            let scale = cell.p[h][0]
                .norm()
                .max(cell.p[h][1].norm())
                .max(f64::MIN_POSITIVE);
            let err = (got - want).norm() / scale;
            if !(err <= SPOT_TOLERANCE) {
                return Err(Error::CalibrationMismatch(err));
            }
        }
    }
    Ok(())
}

/// Near and far maps separated from the two window maps.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowSolution {
    pub near: RdMatrix,
    /// Range index `d` means delay `d + L`.
    pub far: RdMatrix,
    /// In-band cells whose pattern could not be inverted.
    pub flagged: Vec<(usize, usize)>,
}

pub fn solve_windows(
    std: &RdMatrix,
    shifted: &RdMatrix,
    pattern: &PatternTensor,
) -> Result<WindowSolution> {
    if std.n_range != shifted.n_range || std.n_doppler != shifted.n_doppler {
        return Err(Error::LengthMismatch {
            what: "window maps",
            expected: std.values.len(),
            actual: shifted.values.len(),
        });
    }
    if std.n_range != pattern.n_range || std.n_doppler != pattern.n_doppler {
        return Err(Error::LengthMismatch {
            what: "pattern",
            expected: std.n_range * std.n_doppler,
            actual: pattern.n_range * pattern.n_doppler,
        });
    }
    let g = std.n_doppler;
    let mut near = RdMatrix::zeros(std.n_range, g, std.axes);
    let mut far = near.clone();
    far.axes.range_offset_bins = std.axes.range_offset_bins + std.n_range;
    let mut flagged = Vec::new();
    for d in 0..std.n_range {
        for nu in 0..g {
            let Some(cell) = pattern.cell(d, signed_bin(nu, g)) else {
                continue;
            };
            match cell.state {
                CellState::Ok => {
                    let a = [std.get(d, nu), shifted.get(d, nu)];
                    let [rn, rf] = cell.p_sol;
                    near.set(d, nu, rn[0] * a[0] + rn[1] * a[1]);
                    far.set(d, nu, rf[0] * a[0] + rf[1] * a[1]);
                }
                CellState::Unresolvable => flagged.push((d, nu)),
                CellState::Filtered => {}
            }
        }
    }
    Ok(WindowSolution { near, far, flagged })
}

/// Inside a `(2r+1)^2` neighbourhood of every peak keep only the peak cell.
/// Doppler wraps; range does not.
pub fn peak_cleanup(rd: &RdMatrix, peaks: &[(usize, usize)], radius: usize) -> RdMatrix {
    let mut out = rd.clone();
    let g = rd.n_doppler as i64;
    let r = radius as i64;
    for &(pd, pn) in peaks {
        for dd in -r..=r {
            let d = pd as i64 + dd;
            if d < 0 || d >= rd.n_range as i64 {
                continue;
            }
            for dn in -r..=r {
                if dd == 0 && dn == 0 {
                    continue;
                }
                let nu = (pn as i64 + dn).rem_euclid(g) as usize;
                if peaks.contains(&(d as usize, nu)) {
                    continue;
                }
                out.set(d as usize, nu, ZERO);
            }
        }
    }
    out
}
