//! Received-signal synthesis at the sensing receiver: self-interference at zero
//! delay, delayed and Doppler-shifted target echoes, and white Gaussian noise.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::config::{WaveformConfig, SPEED_OF_LIGHT};
use crate::dft::phasor_cycles;
use crate::error::{Error, Result};
use crate::waveform::Frame;

/// A point target. Positive velocity means approaching (positive Doppler).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Target {
    pub range_m: f64,
    pub velocity_mps: f64,
    #[serde(default = "unit")]
    pub amplitude: f64,
}

fn unit() -> f64 {
    1.0
}

impl Target {
    pub fn new(range_m: f64, velocity_mps: f64) -> Self {
        Self {
            range_m,
            velocity_mps,
            amplitude: 1.0,
        }
    }

    pub fn from_kmh(range_m: f64, velocity_kmh: f64) -> Self {
        Self::new(range_m, velocity_kmh / 3.6)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelConfig {
    #[serde(default = "defaults::si_over_echo_db")]
    pub si_over_echo_db: f64,
    #[serde(default = "defaults::echo_snr_db")]
    pub echo_snr_db: f64,
    #[serde(default = "defaults::yes")]
    pub si_enabled: bool,
    #[serde(default = "defaults::yes")]
    pub noise_enabled: bool,
    #[serde(default)]
    pub fractional_delay: bool,
}

mod defaults {
    pub fn si_over_echo_db() -> f64 {
        100.0
    }
    pub fn echo_snr_db() -> f64 {
        -10.0
    }
    pub fn yes() -> bool {
        true
    }
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            si_over_echo_db: defaults::si_over_echo_db(),
            echo_snr_db: defaults::echo_snr_db(),
            si_enabled: true,
            noise_enabled: true,
            fractional_delay: false,
        }
    }
}

impl ChannelConfig {
    /// Echoes only: no SI, no noise.
    pub fn clean() -> Self {
        Self {
            si_enabled: false,
            noise_enabled: false,
            ..Self::default()
        }
    }
}

/// Two-way delay in samples and Doppler shift in Hz.
pub fn target_to_delay_doppler(t: &Target, carrier_hz: f64, t_s: f64) -> (f64, f64) {
    let delay = 2.0 * t.range_m / SPEED_OF_LIGHT / t_s;
    let wavelength = SPEED_OF_LIGHT / carrier_hz;
    (delay, 2.0 * t.velocity_mps / wavelength)
}

/// `rx[n] = A_si tx[n] + sum_t a_t tx[n - d_t] e^{j2pi f_t n t_s} + w[n]`.
///
/// The echo reference amplitude (for the SI level and the noise power) is the
/// largest target amplitude, or 1 with no targets. Doppler phase is referenced to
/// the first sample of the frame.
pub fn synthesize_rx(
    tx: &Frame,
    targets: &[Target],
    cc: &ChannelConfig,
    cfg: &WaveformConfig,
    rng: &mut impl Rng,
) -> Result<Frame> {
    if tx.is_empty() {
        return Err(Error::Empty("transmit frame"));
    }
    if let Some(t) = targets.iter().find(|t| !(t.range_m >= 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "target range {} < 0",
            t.range_m
        )));
    }
    let n = tx.len();
    let t_s = cfg.t_s();
    let reference = targets
        .iter()
        .map(|t| t.amplitude.abs())
        .fold(0.0, f64::max);
    let reference = if targets.is_empty() { 1.0 } else { reference };

    let mut rx: Vec<Complex64> = if cc.si_enabled {
        let a_si = reference * 10f64.powf(cc.si_over_echo_db / 20.0);
        tx.samples.iter().map(|x| x * a_si).collect()
    } else {
        vec![Complex64::new(0.0, 0.0); n]
    };

    let echoes: Vec<Vec<Complex64>> = targets
        .par_iter()
        .map(|t| echo(&tx.samples, t, cc.fractional_delay, cfg.carrier_hz, t_s))
        .collect();
    for e in echoes {
        for (r, x) in rx.iter_mut().zip(e) {
            *r += x;
        }
    }

    if cc.noise_enabled {
        let snr = 10f64.powf(cc.echo_snr_db / 10.0);
        let var = reference * reference * tx.mean_power() / snr;
        let sigma = (var / 2.0).sqrt();
        for r in rx.iter_mut() {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            *r += Complex64::new(re, im) * sigma;
        }
    }
    Ok(tx.with_samples(rx))
}

fn echo(
    tx: &[Complex64],
    t: &Target,
    fractional: bool,
    carrier_hz: f64,
    t_s: f64,
) -> Vec<Complex64> {
    let n = tx.len();
    let (delay, doppler) = target_to_delay_doppler(t, carrier_hz, t_s);
    let mut out = if fractional {
        fractional_shift(tx, delay)
    } else {
        let d = delay.round() as usize;
        let mut v = vec![Complex64::new(0.0, 0.0); n];
        if d < n {
            v[d..].copy_from_slice(&tx[..n - d]);
        }
        v
    };
    let step = doppler * t_s;
    for (i, x) in out.iter_mut().enumerate() {
        *x *= phasor_cycles(step * i as f64) * t.amplitude;
    }
    out
}

/// Delay by a non-integer number of samples through a linear phase ramp on a
/// zero-padded spectrum, so nothing wraps into the leading gap.
fn fractional_shift(x: &[Complex64], delay: f64) -> Vec<Complex64> {
    let n = x.len();
    let padded = (n + delay.ceil() as usize + 1).next_power_of_two();
    let mut buf = vec![Complex64::new(0.0, 0.0); padded];
    buf[..n].copy_from_slice(x);
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(padded).process(&mut buf);
    for (q, v) in buf.iter_mut().enumerate() {
        let f = if q < padded / 2 {
            q as f64
        } else {
            q as f64 - padded as f64
        };
        *v *= phasor_cycles(-f * delay / padded as f64) / padded as f64;
    }
    planner.plan_fft_inverse(padded).process(&mut buf);
    buf.truncate(n);
    buf
}
