//! On-disk formats.
//!
//! `RDMX`: magic `RDMX`, `u16` version 1, `u32` rows, `u32` cols, then row-major
//! `(re, im)` pairs as `f64`, all little-endian.
//!
//! `PTRN` (pattern cache): magic `PTRN`, `u16` version, `u32` key length, key
//! bytes, `u32` × 4 (range bins, Doppler bins, band length, guard bins), then
//! `p[hyp][window]` for every cell as four `(re, im)` `f64` pairs.

use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::receiver::{PatternTensor, RdAxes, RdMatrix};

const RDMX_MAGIC: &[u8; 4] = b"RDMX";
const RDMX_VERSION: u16 = 1;
const PTRN_MAGIC: &[u8; 4] = b"PTRN";
const PTRN_VERSION: u16 = 1;

pub fn rdmx_bytes(rd: &RdMatrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(14 + rd.values.len() * 16);
    out.extend_from_slice(RDMX_MAGIC);
    out.extend_from_slice(&RDMX_VERSION.to_le_bytes());
    out.extend_from_slice(&(rd.n_range as u32).to_le_bytes());
    out.extend_from_slice(&(rd.n_doppler as u32).to_le_bytes());
    for v in &rd.values {
        out.extend_from_slice(&v.re.to_le_bytes());
        out.extend_from_slice(&v.im.to_le_bytes());
    }
    out
}

/// Parse an `RDMX` buffer. Axis metadata is not stored and comes back default.
pub fn parse_rdmx(bytes: &[u8]) -> Result<RdMatrix> {
    let mut r = Reader::new(bytes);
    if r.take(4)? != RDMX_MAGIC {
        return Err(Error::Format("missing RDMX magic".into()));
    }
    let version = r.u16()?;
    if version != RDMX_VERSION {
        return Err(Error::Format(format!("unsupported RDMX version {version}")));
    }
    let rows = r.u32()? as usize;
    let cols = r.u32()? as usize;
    let values = r.complex(rows * cols)?;
    r.finish()?;
    Ok(RdMatrix {
        n_range: rows,
        n_doppler: cols,
        values,
        axes: RdAxes::default(),
    })
}

pub fn write_rdmx(path: &Path, rd: &RdMatrix) -> Result<()> {
    std::fs::write(path, rdmx_bytes(rd))?;
    Ok(())
}

pub fn read_rdmx(path: &Path) -> Result<RdMatrix> {
    parse_rdmx(&std::fs::read(path)?)
}

/// One line per range bin of `|RD| / max|RD|`.
pub fn rd_csv(rd: &RdMatrix) -> String {
    let mags = rd.normalized_magnitude();
    let mut out = String::with_capacity(mags.len() * 16);
    for row in mags.chunks(rd.n_doppler.max(1)) {
        for (i, m) in row.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            write!(out, "{m:.9e}").expect("write to String");
        }
        out.push('\n');
    }
    out
}

pub fn write_csv(path: &Path, rd: &RdMatrix) -> Result<()> {
    std::fs::write(path, rd_csv(rd))?;
    Ok(())
}

pub fn pattern_bytes(p: &PatternTensor, key: &str) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(PTRN_MAGIC);
    out.extend_from_slice(&PTRN_VERSION.to_le_bytes());
    out.extend_from_slice(&(key.len() as u32).to_le_bytes());
    out.extend_from_slice(key.as_bytes());
    for v in [p.n_range, p.n_doppler, p.band_len, p.n_guard] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    for cell in &p.cells {
        for v in cell.p.iter().flatten() {
            out.extend_from_slice(&v.re.to_le_bytes());
            out.extend_from_slice(&v.im.to_le_bytes());
        }
    }
    out
}

/// Parse a pattern cache entry, returning it with its stored key.
pub fn parse_pattern(bytes: &[u8]) -> Result<(PatternTensor, String)> {
    let mut r = Reader::new(bytes);
    if r.take(4)? != PTRN_MAGIC {
        return Err(Error::Format("missing PTRN magic".into()));
    }
    let version = r.u16()?;
    if version != PTRN_VERSION {
        return Err(Error::Format(format!("unsupported PTRN version {version}")));
    }
    let key_len = r.u32()? as usize;
    let key =
        String::from_utf8(r.take(key_len)?.to_vec()).map_err(|e| Error::Format(e.to_string()))?;
    let n_range = r.u32()? as usize;
    let n_doppler = r.u32()? as usize;
    let band_len = r.u32()? as usize;
    let n_guard = r.u32()? as usize;
    let flat = r.complex(n_range * band_len * 4)?;
    r.finish()?;
    let p: Vec<[[Complex64; 2]; 2]> = flat
        .chunks(4)
        .map(|c| [[c[0], c[1]], [c[2], c[3]]])
        .collect();
    Ok((
        PatternTensor::from_p(n_range, n_doppler, band_len, n_guard, &p)?,
        key,
    ))
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| Error::Format(format!("truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(
            self.take(2)?.try_into().expect("2 bytes"),
        ))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }

    fn complex(&mut self, n: usize) -> Result<Vec<Complex64>> {
        if n.checked_mul(16)
            .is_none_or(|b| b > self.buf.len() - self.pos)
        {
            return Err(Error::Format(format!("expected {n} complex values")));
        }
        (0..n)
            .map(|_| Ok(Complex64::new(self.f64()?, self.f64()?)))
            .collect()
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(Error::Format(format!(
                "{} trailing bytes",
                self.buf.len() - self.pos
            )));
        }
        Ok(())
    }
}
