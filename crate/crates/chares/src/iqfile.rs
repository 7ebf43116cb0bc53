//! CHIQ on-disk format for [`IqBuffer`].
//!
//! Little-endian layout:
//!
//! ```text
//! 0      4      8            16
//! "CHIQ"  u32 v  u64 count    count * (f64 I, f64 Q)
//! ```
//!
//! The decoder is total over arbitrary bytes: it never panics and never
//! allocates more than the input can back.

use std::fs;
use std::path::Path;

use num_complex::Complex64;

use crate::dsp::IqBuffer;
use crate::error::{Error, Result};

pub const CHIQ_MAGIC: &[u8; 4] = b"CHIQ";
pub const CHIQ_VERSION: u32 = 1;

pub fn encode(buffer: &IqBuffer) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + buffer.len() * 16);
    out.extend_from_slice(CHIQ_MAGIC);
    out.extend_from_slice(&CHIQ_VERSION.to_le_bytes());
    out.extend_from_slice(&(buffer.len() as u64).to_le_bytes());
    for s in buffer.samples() {
        out.extend_from_slice(&s.re.to_le_bytes());
        out.extend_from_slice(&s.im.to_le_bytes());
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<IqBuffer> {
    let mut r = Reader::new(bytes);
    let magic = r.take(4)?;
    if magic != CHIQ_MAGIC {
        return Err(Error::Format("bad CHIQ magic".into()));
    }
    let version = r.u32()?;
    if version != CHIQ_VERSION {
        return Err(Error::Format(format!("unsupported CHIQ version {version}")));
    }
    let count = r.u64()?;
    if count == 0 {
        return Err(Error::Format("CHIQ sample count must be at least 1".into()));
    }
    let payload = count
        .checked_mul(16)
        .ok_or_else(|| Error::Format("CHIQ sample count overflows".into()))?;
    if payload != r.remaining() as u64 {
        return Err(Error::Format(format!(
            "CHIQ payload length mismatch: header says {payload} bytes, {} present",
            r.remaining()
        )));
    }
    let mut samples = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let re = r.f64()?;
        let im = r.f64()?;
        samples.push(Complex64::new(re, im));
    }
    IqBuffer::new(samples).map_err(|e| Error::Format(format!("CHIQ payload invalid: {e}")))
}

pub fn write(path: &Path, buffer: &IqBuffer) -> Result<()> {
    fs::write(path, encode(buffer))?;
    Ok(())
}

pub fn read(path: &Path) -> Result<IqBuffer> {
    decode(&fs::read(path)?)
}

/// Bounds-checked little-endian cursor shared by the CHIQ and CHNN decoders.
pub(crate) struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub(crate) fn new(bytes: &'a [u8]) -> Self {
        Reader { bytes, pos: 0 }
    }

    pub(crate) fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.remaining() < n {
            return Err(Error::Format(format!(
                "truncated input: wanted {n} bytes, {} left",
                self.remaining()
            )));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    pub(crate) fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub(crate) fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub(crate) fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub(crate) fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}
