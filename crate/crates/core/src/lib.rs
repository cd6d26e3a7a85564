//! Simulation of two half-duplex joint communications and sensing (JCAS) waveforms:
//! random time-division (RTD) chirp placement, and flexible sensing-implanted OFDM
//! (FSI-OFDM), where an FMCW chirp rides on one subcarrier spreading code while the
//! remaining codes carry data.
//!
//! The crate covers the whole chain: waveform synthesis ([`waveform`]), occasion
//! scheduling ([`scheduler`]), the echo/self-interference channel ([`channel`]), the
//! analog-style FMCW receiver with code-domain SI cancellation and the dual-window
//! distance extension ([`receiver`]), detection and scoring ([`detect`]), the
//! communications link ([`comms`]), and scenario orchestration with deterministic
//! artifacts ([`scenario`], [`runner`], [`artifact`], [`selftest`]).
//!
//! Conventions: every index is 0-based and every DFT is unitary.

// NaN must fail the `!(x > 0.0)` style checks.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod artifact;
pub mod channel;
pub mod comms;
pub mod config;
pub mod detect;
pub mod dft;
pub mod error;
pub mod receiver;
pub mod rng;
pub mod runner;
pub mod scenario;
pub mod scheduler;
pub mod selftest;
pub mod waveform;

pub use config::WaveformConfig;
pub use error::{Error, Result};
pub use num_complex::Complex64;
