use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Where the ADC sits in the receive chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Placement {
    /// On the raw received samples, SI included.
    RawRx,
    /// After mixing, delay-and-sum and analog DC removal.
    AfterCancellation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FullScale {
    Fixed(f64),
    /// Multiple of the RMS of one I/Q component of the quantizer input.
    RmsMultiple(f64),
}

impl FullScale {
    pub fn resolve(&self, v: &[Complex64]) -> f64 {
        match *self {
            FullScale::Fixed(fs) => fs,
            FullScale::RmsMultiple(k) => {
                if v.is_empty() {
                    return k;
                }
                let p = v.iter().map(|x| x.norm_sqr()).sum::<f64>() / (2 * v.len()) as f64;
                k * p.sqrt()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quantizer {
    pub bits: u32,
    pub placement: Placement,
    pub full_scale: FullScale,
}

impl Quantizer {
    pub fn apply(&self, v: &[Complex64]) -> Result<Vec<Complex64>> {
        quantize(v, self.bits, self.full_scale.resolve(v))
    }
}

/// Mid-rise uniform quantizer applied to I and Q separately, `2^bits` levels
/// spanning `[-full_scale, full_scale]`, saturating outside.
pub fn quantize(v: &[Complex64], bits: u32, full_scale: f64) -> Result<Vec<Complex64>> {
    if !(4..=16).contains(&bits) {
        return Err(Error::InvalidArgument(format!(
            "bits must be in [4, 16], got {bits}"
        )));
    }
    if !(full_scale > 0.0) || !full_scale.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "full scale must be positive, got {full_scale}"
        )));
    }
    let levels = (1u32 << bits) as f64;
    let step = 2.0 * full_scale / levels;
    let top = full_scale - step / 2.0;
    let q = |x: f64| (step * ((x / step).floor() + 0.5)).clamp(-top, top);
    Ok(v.iter().map(|x| Complex64::new(q(x.re), q(x.im))).collect())
}
