//! Little-endian binary file helpers with byte-offset error reporting.

use std::io::{Read, Write};

use crate::error::{Error, Result};

pub struct ByteReader<R: Read> {
    inner: R,
    offset: u64,
}

impl<R: Read> ByteReader<R> {
    pub fn new(inner: R) -> Self {
        Self { inner, offset: 0 }
    }

    pub fn offset(&self) -> u64 {
        self.offset
    }

    fn fill(&mut self, buf: &mut [u8], what: &str) -> Result<()> {
        let at = self.offset;
        self.inner.read_exact(buf).map_err(|e| Error::Parse {
            offset: at,
            detail: format!("truncated while reading {what}: {e}"),
        })?;
        self.offset += buf.len() as u64;
        Ok(())
    }

    pub fn expect_magic(&mut self, magic: &[u8; 16], what: &str) -> Result<()> {
        let at = self.offset;
        let mut buf = [0u8; 16];
        self.fill(&mut buf, "magic header")?;
        if &buf != magic {
            return Err(Error::Parse {
                offset: at,
                detail: format!("bad magic header, not a {what} file"),
            });
        }
        Ok(())
    }

    pub fn read_u32(&mut self, what: &str) -> Result<u32> {
        let mut buf = [0u8; 4];
        self.fill(&mut buf, what)?;
        Ok(u32::from_le_bytes(buf))
    }

    pub fn read_u8(&mut self, what: &str) -> Result<u8> {
        let mut buf = [0u8; 1];
        self.fill(&mut buf, what)?;
        Ok(buf[0])
    }

    pub fn read_f64(&mut self, what: &str) -> Result<f64> {
        let mut buf = [0u8; 8];
        self.fill(&mut buf, what)?;
        Ok(f64::from_le_bytes(buf))
    }

    pub fn read_f64_vec(&mut self, n: usize, what: &str) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            out.push(self.read_f64(what)?);
        }
        Ok(out)
    }

    pub fn expect_version(&mut self, expected: u32) -> Result<()> {
        let at = self.offset;
        let v = self.read_u32("version")?;
        if v != expected {
            return Err(Error::Parse {
                offset: at,
                detail: format!("unsupported version {v}, expected {expected}"),
            });
        }
        Ok(())
    }

    /// Fails if any bytes remain unconsumed.
    pub fn expect_eof(&mut self) -> Result<()> {
        let mut buf = [0u8; 1];
        match self.inner.read(&mut buf) {
            Ok(0) => Ok(()),
            Ok(_) => Err(Error::Parse {
                offset: self.offset,
                detail: "trailing bytes after end of record".to_string(),
            }),
            Err(e) => Err(e.into()),
        }
    }
}

pub struct ByteWriter<W: Write> {
    inner: W,
}

impl<W: Write> ByteWriter<W> {
    pub fn new(inner: W) -> Self {
        Self { inner }
    }

    pub fn write_bytes(&mut self, bytes: &[u8]) -> Result<()> {
        self.inner.write_all(bytes)?;
        Ok(())
    }

    pub fn write_u32(&mut self, v: u32) -> Result<()> {
        self.write_bytes(&v.to_le_bytes())
    }

    pub fn write_u8(&mut self, v: u8) -> Result<()> {
        self.write_bytes(&[v])
    }

    pub fn write_f64(&mut self, v: f64) -> Result<()> {
        self.write_bytes(&v.to_le_bytes())
    }

    pub fn write_f64_slice(&mut self, vs: &[f64]) -> Result<()> {
        for &v in vs {
            self.write_f64(v)?;
        }
        Ok(())
    }
}
