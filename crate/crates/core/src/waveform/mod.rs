//! Transmit-side synthesis: chirps, the shifted base set, the spreading code set,
//! per-code sensing waveforms and complete RTD / FSI-OFDM frames.

mod codes;
mod frame;

pub use codes::{
    make_base_set, make_code_matrix, make_sensing_waveforms, spread_and_assemble, BaseSet,
    CodeMatrix, FreqGrid, SensingWaveforms,
};
pub use frame::{
    assemble_frame, assemble_symbol, payload_len, random_qpsk, rotation, Frame, FrameLayout,
};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::config::WaveformConfig;
use crate::dft::{phasor_cycles, UnitaryFft};
use crate::error::Result;

/// Linear FM chirp parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChirpSpec {
    pub f0_hz: f64,
    pub kc_hz_per_s: f64,
    pub length: usize,
}

impl ChirpSpec {
    /// Sweep from `-B/2` to `B/2` across one occasion.
    pub fn for_config(cfg: &WaveformConfig) -> Self {
        Self {
            f0_hz: -cfg.b_hz() / 2.0,
            kc_hz_per_s: cfg.b_hz() / cfg.t_chirp(),
            length: cfg.l_occ(),
        }
    }
}

/// `out[n] = exp(j2pi (f0 n t_s + kc n^2 t_s^2 / 2))`.
pub fn make_chirp(spec: &ChirpSpec, t_s: f64) -> Vec<Complex64> {
    (0..spec.length)
        .map(|n| {
            let t = n as f64 * t_s;
            phasor_cycles(spec.f0_hz * t + 0.5 * spec.kc_hz_per_s * t * t)
        })
        .collect()
}

/// Everything the transmitter and the sensing receiver share for one grid.
#[derive(Debug, Clone)]
pub struct Waveforms {
    pub cfg: WaveformConfig,
    pub chirp: Vec<Complex64>,
    /// Unitary L-point DFT of `chirp`.
    pub chirp_spectrum: Vec<Complex64>,
    pub codes: CodeMatrix,
    pub sensing: SensingWaveforms,
}

impl Waveforms {
    pub fn new(cfg: WaveformConfig) -> Result<Self> {
        cfg.validate()?;
        let spec = ChirpSpec::for_config(&cfg);
        let chirp = make_chirp(&spec, cfg.t_s());
        Self::with_chirp(cfg, chirp)
    }

    pub fn with_chirp(cfg: WaveformConfig, chirp: Vec<Complex64>) -> Result<Self> {
        cfg.validate()?;
        let chirp_spectrum = UnitaryFft::new(cfg.l_occ())?.forward(&chirp)?;
        let base = make_base_set(&cfg, &chirp)?;
        let codes = make_code_matrix(cfg.m_codes)?;
        let sensing = make_sensing_waveforms(&base, &codes)?;
        Ok(Self {
            cfg,
            chirp,
            chirp_spectrum,
            codes,
            sensing,
        })
    }
}
