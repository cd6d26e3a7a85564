//! Unitary DFT helpers on top of `rustfft`.
//!
//! Both directions are scaled by `1/sqrt(n)`, so `idft(dft(v)) == v` and Parseval
//! holds without extra factors.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// A planned forward/inverse pair of a fixed length.
#[derive(Clone)]
pub struct UnitaryFft {
    len: usize,
    scale: f64,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for UnitaryFft {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("UnitaryFft")
            .field("len", &self.len)
            .finish()
    }
}

impl UnitaryFft {
    pub fn new(len: usize) -> Result<Self> {
        if len == 0 {
            return Err(Error::Empty("dft input"));
        }
        let mut planner = FftPlanner::new();
        Ok(Self {
            len,
            scale: 1.0 / (len as f64).sqrt(),
            forward: planner.plan_fft_forward(len),
            inverse: planner.plan_fft_inverse(len),
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn forward_in_place(&self, buf: &mut [Complex64]) {
        debug_assert_eq!(buf.len(), self.len);
        self.forward.process(buf);
        buf.iter_mut().for_each(|x| *x *= self.scale);
    }

    pub fn inverse_in_place(&self, buf: &mut [Complex64]) {
        debug_assert_eq!(buf.len(), self.len);
        self.inverse.process(buf);
        buf.iter_mut().for_each(|x| *x *= self.scale);
    }

    pub fn forward(&self, v: &[Complex64]) -> Result<Vec<Complex64>> {
        self.check(v)?;
        let mut out = v.to_vec();
        self.forward_in_place(&mut out);
        Ok(out)
    }

    pub fn inverse(&self, v: &[Complex64]) -> Result<Vec<Complex64>> {
        self.check(v)?;
        let mut out = v.to_vec();
        self.inverse_in_place(&mut out);
        Ok(out)
    }

    fn check(&self, v: &[Complex64]) -> Result<()> {
        if v.len() != self.len {
            return Err(Error::LengthMismatch {
                what: "dft input",
                expected: self.len,
                actual: v.len(),
            });
        }
        Ok(())
    }
}

/// Unitary forward DFT: `out[q] = n^{-1/2} sum_n v[n] e^{-j2pi qn/len}`.
pub fn unitary_dft(v: &[Complex64]) -> Result<Vec<Complex64>> {
    UnitaryFft::new(v.len())?.forward(v)
}

/// Unitary inverse DFT.
pub fn unitary_idft(v: &[Complex64]) -> Result<Vec<Complex64>> {
    UnitaryFft::new(v.len())?.inverse(v)
}

/// `e^{j 2 pi num / den}` evaluated from the reduced integer ratio, which keeps
/// large index products exact.
pub fn unit_phasor(num: i64, den: u64) -> Complex64 {
    let r = num.rem_euclid(den as i64) as f64 / den as f64;
    Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * r)
}

/// `e^{j 2 pi cycles}` with the integer part of `cycles` removed first.
pub fn phasor_cycles(cycles: f64) -> Complex64 {
    let frac = cycles - cycles.floor();
    Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * frac)
}

pub fn energy(v: &[Complex64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// Direct O(n^2) evaluation of the unitary DFT.
    fn brute_dft(v: &[Complex64]) -> Vec<Complex64> {
        let n = v.len();
        (0..n)
            .map(|q| {
                v.iter()
                    .enumerate()
                    .map(|(i, x)| x * unit_phasor(-((q * i) as i64), n as u64))
                    .sum::<Complex64>()
                    / (n as f64).sqrt()
            })
            .collect()
    }

    #[test]
    fn delta_is_flat() {
        let out = unitary_dft(&[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]).unwrap();
        for x in out {
            assert!((x - c(0.5, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn ones_concentrate_at_dc() {
        let out = unitary_dft(&[c(1.0, 0.0); 4]).unwrap();
        assert!((out[0] - c(2.0, 0.0)).norm() < 1e-15);
        for x in &out[1..] {
            assert!(x.norm() < 1e-15);
        }
    }

    #[test]
    fn zero_length_rejected() {
        assert!(matches!(unitary_dft(&[]), Err(Error::Empty(_))));
        assert!(unitary_idft(&[]).is_err());
    }

    #[test]
    fn matches_brute_force_on_odd_length() {
        let v: Vec<_> = (0..15)
            .map(|i| c((i as f64).sin(), (i as f64 * 0.3).cos()))
            .collect();
        let fast = unitary_dft(&v).unwrap();
        for (a, b) in fast.iter().zip(brute_dft(&v)) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn unit_phasor_wraps() {
        assert!((unit_phasor(5, 4) - c(0.0, 1.0)).norm() < 1e-15);
        assert!((unit_phasor(-1, 4) - c(0.0, -1.0)).norm() < 1e-15);
    }

    proptest::proptest! {
        #[test]
        fn inverse_pair_and_parseval(parts in proptest::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 1..200)) {
            let v: Vec<_> = parts.iter().map(|&(a, b)| c(a, b)).collect();
            let f = unitary_dft(&v).unwrap();
            proptest::prop_assert!((energy(&f) - energy(&v)).abs() <= 1e-10 * energy(&v).max(1.0));
            let back = unitary_idft(&f).unwrap();
            for (a, b) in back.iter().zip(&v) {
                proptest::prop_assert!((a - b).norm() < 1e-13 * 10.0);
            }
        }
    }
}
