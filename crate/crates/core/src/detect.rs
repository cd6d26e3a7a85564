//! Peak picking on range-Doppler maps and scoring against ground truth.

use serde::{Deserialize, Serialize};

use crate::config::WaveformConfig;
use crate::error::{Error, Result};
use crate::receiver::RdMatrix;

const MPS_TO_KMH: f64 = 3.6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapTag {
    Single,
    Near,
    Far,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub range_m: f64,
    pub velocity_kmh: f64,
    /// Peak power over the global maximum of the searched maps.
    pub normalized_power: f64,
    /// `(range bin, Doppler column)` in the map it was found in.
    pub cell: (usize, usize),
    pub doppler_bin: i64,
    pub map: MapTag,
    /// Absolute cell power `|RD|^2`.
    pub power: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PeakParams {
    pub rel_threshold: f64,
    pub max_peaks: usize,
    pub guard: usize,
}

impl Default for PeakParams {
    fn default() -> Self {
        Self {
            rel_threshold: 0.05,
            max_peaks: 16,
            guard: 2,
        }
    }
}

/// Local maxima above `rel_threshold` times the global maximum, strongest first.
pub fn find_peaks(rd: &RdMatrix, tag: MapTag, params: &PeakParams) -> Result<Vec<Detection>> {
    find_peaks_joint(&[(rd, tag)], params)
}

/// Peak search over several maps sharing one normalisation (the near and far
/// maps of the dual-window receiver).
pub fn find_peaks_joint(
    maps: &[(&RdMatrix, MapTag)],
    params: &PeakParams,
) -> Result<Vec<Detection>> {
    if !(params.rel_threshold > 0.0 && params.rel_threshold < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "rel_threshold must be in (0, 1), got {}",
            params.rel_threshold
        )));
    }
    if maps.is_empty() || maps.iter().any(|(rd, _)| rd.values.is_empty()) {
        return Err(Error::Empty("range-Doppler matrix"));
    }
    let global = maps
        .iter()
        .map(|(rd, _)| rd.max_power())
        .fold(0.0, f64::max);
    if global == 0.0 {
        return Ok(Vec::new());
    }
    let floor = params.rel_threshold * global;
    let mut found = Vec::new();
    for (order, &(rd, tag)) in maps.iter().enumerate() {
        for d in 0..rd.n_range {
            for nu in 0..rd.n_doppler {
                let p = rd.power(d, nu);
                if p > floor && is_local_max(rd, d, nu, params.guard) {
                    found.push((
                        order,
                        Detection {
                            range_m: rd.range_m(d),
                            velocity_kmh: rd.velocity_mps(nu) * MPS_TO_KMH,
                            normalized_power: p / global,
                            cell: (d, nu),
                            doppler_bin: rd.signed_doppler(nu),
                            map: tag,
                            power: p,
                        },
                    ));
                }
            }
        }
    }
    found.sort_by(|(oa, a), (ob, b)| {
        b.power
            .total_cmp(&a.power)
            .then(oa.cmp(ob))
            .then(a.cell.0.cmp(&b.cell.0))
            .then(a.cell.1.cmp(&b.cell.1))
    });
    found.truncate(params.max_peaks);
    Ok(found.into_iter().map(|(_, d)| d).collect())
}

/// Strictly above earlier neighbours and not below later ones, so a plateau
/// yields its first cell only. Doppler wraps; range does not.
fn is_local_max(rd: &RdMatrix, d: usize, nu: usize, guard: usize) -> bool {
    let p = rd.power(d, nu);
    let g = rd.n_doppler as i64;
    let r = guard as i64;
    for dd in -r..=r {
        let d2 = d as i64 + dd;
        if d2 < 0 || d2 >= rd.n_range as i64 {
            continue;
        }
        for dn in -r..=r {
            if (dd, dn) == (0, 0) {
                continue;
            }
            let nu2 = (nu as i64 + dn).rem_euclid(g) as usize;
            let q = rd.power(d2 as usize, nu2);
            let earlier = (d2 as usize, nu2) < (d, nu);
            if q > p || (q == p && earlier) {
                return false;
            }
        }
    }
    true
}

/// Physical coordinates of cell `(d, nu)` in a map with `g` Doppler columns.
pub fn cell_to_physical(
    d: usize,
    nu: usize,
    cfg: &WaveformConfig,
    g: usize,
    far: bool,
) -> (f64, f64) {
    let offset = if far { cfg.l_occ() } else { 0 };
    let range = (d + offset) as f64 * cfg.range_bin_m();
    let half = (g / 2) as i64;
    let signed = (nu as i64 + half).rem_euclid(g as i64) - half;
    let doppler_hz = signed as f64 / (g as f64 * cfg.t_chirp());
    (range, doppler_hz * cfg.wavelength() / 2.0 * MPS_TO_KMH)
}

/// Nearest cell `(d, nu)` of a physical target, the inverse of [`cell_to_physical`]
/// for on-grid targets. Range is reduced modulo the map's span.
pub fn physical_to_cell(
    range_m: f64,
    velocity_kmh: f64,
    cfg: &WaveformConfig,
    g: usize,
) -> (usize, usize) {
    let d = (range_m / cfg.range_bin_m()).round() as i64;
    let doppler_hz = 2.0 * velocity_kmh / MPS_TO_KMH / cfg.wavelength();
    let nu = (doppler_hz * g as f64 * cfg.t_chirp()).round() as i64;
    (
        d.rem_euclid(cfg.l_occ() as i64) as usize,
        nu.rem_euclid(g as i64) as usize,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    pub range_m: f64,
    pub velocity_kmh: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerance {
    pub range_bins: f64,
    pub doppler_bins: f64,
    /// Half-width of the box around each truth excluded from the interference
    /// floor.
    pub exclusion_bins: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            range_bins: 1.0,
            doppler_bins: 1.0,
            exclusion_bins: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Match {
    pub truth: usize,
    pub detection: usize,
    pub range_err_bins: f64,
    pub doppler_err_bins: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub matches: Vec<Match>,
    /// Indices of unmatched truths.
    pub misses: Vec<usize>,
    /// Indices of unmatched detections.
    pub false_alarms: Vec<usize>,
    /// Weakest matched peak over the strongest cell outside every truth box, dB.
    pub peak_to_interference_db: Option<f64>,
}

/// Greedy nearest matching within `tol`, then the peak-to-interference ratio
/// over `maps`. Bin sizes come from the first map.
pub fn evaluate(
    dets: &[Detection],
    truth: &[Truth],
    tol: &Tolerance,
    maps: &[&RdMatrix],
) -> EvalReport {
    let mut pairs = Vec::new();
    if let Some(rd0) = maps.first() {
        let range_bin = rd0.axes.range_bin_m;
        let vel_bin = rd0.axes.doppler_bin_hz * rd0.axes.wavelength_m / 2.0 * MPS_TO_KMH;
        let g = rd0.n_doppler as f64;
        for (ti, t) in truth.iter().enumerate() {
            for (di, det) in dets.iter().enumerate() {
                let er = (det.range_m - t.range_m) / range_bin;
                let ev = wrap((det.velocity_kmh - t.velocity_kmh) / vel_bin, g);
                if er.abs() <= tol.range_bins + 1e-9 && ev.abs() <= tol.doppler_bins + 1e-9 {
                    pairs.push((er * er + ev * ev, ti, di, er, ev));
                }
            }
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut truth_used = vec![false; truth.len()];
    let mut det_used = vec![false; dets.len()];
    let mut matches = Vec::new();
    for (_, ti, di, er, ev) in pairs {
        if truth_used[ti] || det_used[di] {
            continue;
        }
        truth_used[ti] = true;
        det_used[di] = true;
        matches.push(Match {
            truth: ti,
            detection: di,
            range_err_bins: er,
            doppler_err_bins: ev,
        });
    }
    matches.sort_by_key(|m| m.truth);

    let pir = if matches.is_empty() {
        None
    } else {
        let weakest = matches
            .iter()
            .map(|m| dets[m.detection].power)
            .fold(f64::INFINITY, f64::min);
        let floor = interference_floor(maps, truth, tol.exclusion_bins);
        Some(10.0 * (weakest / floor).log10())
    };
    EvalReport {
        matches,
        misses: (0..truth.len()).filter(|&i| !truth_used[i]).collect(),
        false_alarms: (0..dets.len()).filter(|&i| !det_used[i]).collect(),
        peak_to_interference_db: pir,
    }
}

fn wrap(x: f64, period: f64) -> f64 {
    x - period * (x / period).round()
}

/// Strongest cell power outside the truth boxes of every map.
fn interference_floor(maps: &[&RdMatrix], truth: &[Truth], radius: usize) -> f64 {
    let mut floor = 0.0f64;
    for rd in maps {
        let centres: Vec<(i64, i64)> = truth
            .iter()
            .map(|t| {
                let d = (t.range_m / rd.axes.range_bin_m).round() as i64
                    - rd.axes.range_offset_bins as i64;
                let hz = 2.0 * t.velocity_kmh / MPS_TO_KMH / rd.axes.wavelength_m;
                (d, (hz / rd.axes.doppler_bin_hz).round() as i64)
            })
            .collect();
        let g = rd.n_doppler as i64;
        let r = radius as i64;
        for d in 0..rd.n_range {
            for nu in 0..rd.n_doppler {
                let excluded = centres.iter().any(|&(cd, cn)| {
                    (d as i64 - cd).abs() <= r
                        && wrap((nu as i64 - cn) as f64, g as f64).abs() <= r as f64
                });
                if !excluded {
                    floor = floor.max(rd.power(d, nu));
                }
            }
        }
    }
    floor
}
