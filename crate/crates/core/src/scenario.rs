//! Run configuration, read from JSON.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::channel::{ChannelConfig, Target};
use crate::comms::CommsLink;
use crate::config::WaveformConfig;
use crate::detect::{PeakParams, Tolerance, Truth};
use crate::error::{Error, Result};
use crate::receiver::Quantizer;
use crate::scheduler::{RtdMode, Scheme};

const KMH_PER_MPS: f64 = 3.6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioTarget {
    pub range_m: f64,
    pub velocity_kmh: f64,
    #[serde(default = "one")]
    pub amplitude: f64,
}

fn one() -> f64 {
    1.0
}

impl ScenarioTarget {
    pub fn to_target(&self) -> Target {
        Target {
            range_m: self.range_m,
            velocity_mps: self.velocity_kmh / KMH_PER_MPS,
            amplitude: self.amplitude,
        }
    }

    pub fn truth(&self) -> Truth {
        Truth {
            range_m: self.range_m,
            velocity_kmh: self.velocity_kmh,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub waveform: WaveformConfig,
    pub schemes: Vec<Scheme>,
    /// Sensing occasions for the slotted schemes.
    pub k_slotted: usize,
    /// Symbols for the FSI schemes.
    pub k_fsi: usize,
    pub rtd_mode: RtdMode,
    pub targets: Vec<ScenarioTarget>,
    pub channel: ChannelConfig,
    pub n_guard: usize,
    pub quantizer: Option<Quantizer>,
    pub detection: PeakParams,
    pub tolerance: Tolerance,
    /// Enables peak cleanup with this radius before the dual-window solve.
    pub cleanup_radius: Option<usize>,
    pub comms: Option<CommsLink>,
    pub seed: u64,
    pub output_dir: PathBuf,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            name: "scenario".into(),
            waveform: WaveformConfig::default(),
            schemes: vec![Scheme::FsiRandom],
            k_slotted: 80,
            k_fsi: 64,
            rtd_mode: RtdMode::default(),
            targets: Vec::new(),
            channel: ChannelConfig::default(),
            n_guard: 1,
            quantizer: None,
            detection: PeakParams::default(),
            tolerance: Tolerance::default(),
            cleanup_radius: None,
            comms: None,
            seed: 0,
            output_dir: PathBuf::from("out"),
        }
    }
}

/// Built-in scenarios.
pub const PRESETS: &[(&str, &str)] = &[
    ("fig6", include_str!("../../../presets/fig6.json")),
    ("fig7", include_str!("../../../presets/fig7.json")),
    (
        "fig7_offgrid",
        include_str!("../../../presets/fig7_offgrid.json"),
    ),
];

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        let s: Scenario = serde_json::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read scenario {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn preset(name: &str) -> Result<Self> {
        let key = name.replace('-', "_");
        PRESETS
            .iter()
            .find(|(n, _)| *n == key)
            .map(|(_, text)| Self::from_json(text))
            .unwrap_or_else(|| {
                let known: Vec<&str> = PRESETS.iter().map(|(n, _)| *n).collect();
                Err(Error::Config(format!(
                    "unknown preset {name:?} (known: {})",
                    known.join(", ")
                )))
            })
    }

    pub fn k_for(&self, scheme: Scheme) -> usize {
        if scheme.is_fsi() {
            self.k_fsi
        } else {
            self.k_slotted
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.waveform.validate()?;
        if self.schemes.is_empty() {
            return Err(Error::Config("no schemes selected".into()));
        }
        if self.k_slotted == 0 || self.k_fsi == 0 {
            return Err(Error::Config("K must be positive".into()));
        }
        if self.schemes.contains(&Scheme::FsiTail) && self.k_fsi < 2 {
            return Err(Error::Config(
                "the dual-window receiver needs K >= 2".into(),
            ));
        }
        if let Some(t) = self
            .targets
            .iter()
            .find(|t| !(t.range_m >= 0.0) || !t.velocity_kmh.is_finite())
        {
            return Err(Error::Config(format!("bad target {t:?}")));
        }
        if self.n_guard == 0 || self.n_guard >= self.waveform.l_occ() {
            return Err(Error::Config(format!(
                "n_guard must be in [1, {})",
                self.waveform.l_occ()
            )));
        }
        let d = &self.detection;
        if !(d.rel_threshold > 0.0 && d.rel_threshold < 1.0) || d.max_peaks == 0 {
            return Err(Error::Config(
                "detection threshold must be in (0, 1) and max_peaks >= 1".into(),
            ));
        }
        if let Some(q) = &self.quantizer {
            if !(4..=16).contains(&q.bits) {
                return Err(Error::Config(format!(
                    "quantizer bits {} outside [4, 16]",
                    q.bits
                )));
            }
        }
        if self.cleanup_radius == Some(0) {
            return Err(Error::Config("cleanup radius must be >= 1".into()));
        }
        Ok(())
    }
}
