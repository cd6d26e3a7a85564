//! Grid constants shared by every stage.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Propagation speed used for all range/Doppler conversions (m/s).
pub const SPEED_OF_LIGHT: f64 = 3.0e8;

/// OFDM grid and sensing-occasion geometry.
///
/// `l_occ = n_fft / m_codes` is the occasion (chirp) length in samples, and the
/// cyclic prefix must be a whole number of occasions so that the slow-time grid
/// stays uniform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveformConfig {
    #[serde(default = "defaults::n_fft")]
    pub n_fft: usize,
    #[serde(default = "defaults::m_codes")]
    pub m_codes: usize,
    #[serde(default = "defaults::n_cp")]
    pub n_cp: usize,
    #[serde(default = "defaults::scs_hz")]
    pub scs_hz: f64,
    #[serde(default = "defaults::carrier_hz")]
    pub carrier_hz: f64,
    /// Amplitude applied to the sensing code term of every FSI symbol.
    #[serde(default = "defaults::sensing_scale")]
    pub sensing_scale: f64,
}

mod defaults {
    pub fn n_fft() -> usize {
        2048
    }
    pub fn m_codes() -> usize {
        4
    }
    pub fn n_cp() -> usize {
        512
    }
    pub fn scs_hz() -> f64 {
        60e3
    }
    pub fn carrier_hz() -> f64 {
        60e9
    }
    pub fn sensing_scale() -> f64 {
        1.0
    }
}

impl Default for WaveformConfig {
    fn default() -> Self {
        Self {
            n_fft: defaults::n_fft(),
            m_codes: defaults::m_codes(),
            n_cp: defaults::n_cp(),
            scs_hz: defaults::scs_hz(),
            carrier_hz: defaults::carrier_hz(),
            sensing_scale: defaults::sensing_scale(),
        }
    }
}

impl WaveformConfig {
    /// Config with the given grid and the default CP of one occasion.
    pub fn with_grid(n_fft: usize, m_codes: usize) -> Self {
        Self {
            n_fft,
            m_codes,
            n_cp: n_fft.checked_div(m_codes).unwrap_or(0),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m_codes < 2 {
            return Err(Error::Config(format!(
                "m_codes must be >= 2, got {}",
                self.m_codes
            )));
        }
        if self.n_fft == 0 || !self.n_fft.is_multiple_of(self.m_codes) {
            return Err(Error::Config(format!(
                "n_fft ({}) must be a positive multiple of m_codes ({})",
                self.n_fft, self.m_codes
            )));
        }
        if !self.n_cp.is_multiple_of(self.l_occ()) {
            return Err(Error::Config(format!(
                "n_cp ({}) must be a multiple of the occasion length ({})",
                self.n_cp,
                self.l_occ()
            )));
        }
        if !(self.scs_hz > 0.0) || !(self.carrier_hz > 0.0) {
            return Err(Error::Config(
                "scs_hz and carrier_hz must be positive".into(),
            ));
        }
        if !self.sensing_scale.is_finite() {
            return Err(Error::Config("sensing_scale must be finite".into()));
        }
        Ok(())
    }

    /// Occasion length `L = N / M`.
    pub fn l_occ(&self) -> usize {
        self.n_fft / self.m_codes
    }

    pub fn t_s(&self) -> f64 {
        1.0 / (self.n_fft as f64 * self.scs_hz)
    }

    pub fn b_hz(&self) -> f64 {
        self.n_fft as f64 * self.scs_hz
    }

    pub fn t_chirp(&self) -> f64 {
        self.l_occ() as f64 * self.t_s()
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_hz
    }

    /// Meters per fast-time bin (one sample of two-way delay).
    pub fn range_bin_m(&self) -> f64 {
        SPEED_OF_LIGHT * self.t_s() / 2.0
    }

    /// Occasions covered by the cyclic prefix.
    pub fn cp_occasions(&self) -> usize {
        self.n_cp / self.l_occ()
    }

    /// Occasions per FSI-OFDM symbol including its CP.
    pub fn occasions_per_symbol(&self) -> usize {
        self.m_codes + self.cp_occasions()
    }

    pub fn symbol_len(&self) -> usize {
        self.n_fft + self.n_cp
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_reference_numerology() {
        let cfg = WaveformConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.l_occ(), 512);
        assert!((cfg.b_hz() - 122.88e6).abs() < 1e-3);
        assert!((cfg.t_s() - 8.138e-9).abs() < 1e-12);
        assert!((cfg.t_chirp() - 4.1667e-6).abs() < 1e-9);
        assert_eq!(cfg.occasions_per_symbol(), 5);
        assert!((cfg.wavelength() - 5e-3).abs() < 1e-15);
        assert!((cfg.range_bin_m() - 1.2207).abs() < 1e-4);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(WaveformConfig::with_grid(2048, 1).validate().is_err());
        assert!(WaveformConfig::with_grid(2049, 4).validate().is_err());
        let cfg = WaveformConfig {
            n_cp: 100,
            ..WaveformConfig::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = WaveformConfig {
            scs_hz: 0.0,
            ..WaveformConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn zero_cp_is_allowed() {
        let cfg = WaveformConfig {
            n_cp: 0,
            ..WaveformConfig::default()
        };
        cfg.validate().unwrap();
        assert_eq!(cfg.occasions_per_symbol(), 4);
    }
}
