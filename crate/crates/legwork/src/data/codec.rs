//! Little-endian byte codec used by every on-disk artifact.
//!
//! All multi-byte integers and floats are little-endian. Strings are
//! length-prefixed UTF-8. Containers carry a CRC over the payload so
//! truncation or bit rot surfaces as an explicit load error.

use crate::error::Error;
use crate::Result;

/// CRC-32 (IEEE 802.3, reflected, init/final xor 0xFFFFFFFF).
pub fn crc32(bytes: &[u8]) -> u32 {
    let mut crc: u32 = 0xFFFF_FFFF;
    for &b in bytes {
        crc ^= u32::from(b);
        for _ in 0..8 {
            let mask = (crc & 1).wrapping_neg();
            crc = (crc >> 1) ^ (0xEDB8_8320 & mask);
        }
    }
    !crc
}

/// Append-only byte sink with typed little-endian writers.
#[derive(Default)]
pub struct Enc {
    buf: Vec<u8>,
}

impl Enc {
    pub fn new() -> Self {
        Enc { buf: Vec::new() }
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.buf
    }

    pub fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn bool(&mut self, v: bool) {
        self.buf.push(u8::from(v));
    }

    pub fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn str(&mut self, v: &str) {
        self.u64(v.len() as u64);
        self.buf.extend_from_slice(v.as_bytes());
    }

    pub fn f64s(&mut self, vs: &[f64]) {
        self.u64(vs.len() as u64);
        for &v in vs {
            self.f64(v);
        }
    }
}

/// Cursor over a byte slice with typed little-endian readers.
pub struct Dec<'a> {
    bytes: &'a [u8],
    pos: usize,
    /// Path reported in decode errors.
    pub path: String,
}

impl<'a> Dec<'a> {
    pub fn new(bytes: &'a [u8], path: &str) -> Self {
        Dec { bytes, pos: 0, path: path.to_string() }
    }

    pub fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.remaining() < n {
            return Err(Error::Malformed {
                path: self.path.clone(),
                detail: format!(
                    "needed {n} bytes at offset {}, only {} left (truncated file)",
                    self.pos,
                    self.remaining()
                ),
            });
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub fn bool(&mut self) -> Result<bool> {
        match self.u8()? {
            0 => Ok(false),
            1 => Ok(true),
            v => Err(self.bad(&format!("bool byte {v}"))),
        }
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    /// u64 that must fit in usize and stay under a sanity cap.
    pub fn len(&mut self, cap: usize) -> Result<usize> {
        let v = self.u64()?;
        if v > cap as u64 {
            return Err(self.bad(&format!("length {v} exceeds cap {cap}")));
        }
        Ok(v as usize)
    }

    pub fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn str(&mut self, cap: usize) -> Result<String> {
        let n = self.len(cap)?;
        let raw = self.take(n)?;
        String::from_utf8(raw.to_vec()).map_err(|_| self.bad("invalid UTF-8 string"))
    }

    pub fn f64s(&mut self, cap: usize) -> Result<Vec<f64>> {
        let n = self.len(cap)?;
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            out.push(self.f64()?);
        }
        Ok(out)
    }

    pub fn bad(&self, detail: &str) -> Error {
        Error::Malformed { path: self.path.clone(), detail: detail.to_string() }
    }

    /// Fails unless every byte was consumed.
    pub fn finish(&self) -> Result<()> {
        if self.remaining() != 0 {
            return Err(Error::Malformed {
                path: self.path.clone(),
                detail: format!("{} trailing bytes after payload", self.remaining()),
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn crc32_matches_the_reference_vector() {
        assert_eq!(crc32(b"123456789"), 0xCBF4_3926);
        assert_eq!(crc32(b""), 0);
    }

    #[test]
    fn primitives_round_trip() {
        let mut e = Enc::new();
        e.u8(7);
        e.bool(true);
        e.u32(0xDEAD_BEEF);
        e.u64(u64::MAX - 1);
        e.f64(-0.1);
        e.str("socket");
        e.f64s(&[1.5, -2.5]);
        let bytes = e.into_bytes();

        let mut d = Dec::new(&bytes, "mem");
        assert_eq!(d.u8().unwrap(), 7);
        assert!(d.bool().unwrap());
        assert_eq!(d.u32().unwrap(), 0xDEAD_BEEF);
        assert_eq!(d.u64().unwrap(), u64::MAX - 1);
        assert_eq!(d.f64().unwrap(), -0.1);
        assert_eq!(d.str(64).unwrap(), "socket");
        assert_eq!(d.f64s(64).unwrap(), vec![1.5, -2.5]);
        d.finish().unwrap();
    }

    #[test]
    fn short_reads_report_truncation() {
        let mut e = Enc::new();
        e.u64(5);
        let bytes = e.into_bytes();
        let mut d = Dec::new(&bytes[..4], "mem");
        let err = d.u64().unwrap_err();
        assert!(err.to_string().contains("truncated"));
    }

    #[test]
    fn trailing_bytes_are_rejected() {
        let bytes = [0u8; 3];
        let mut d = Dec::new(&bytes, "mem");
        d.u8().unwrap();
        assert!(d.finish().is_err());
    }
}
