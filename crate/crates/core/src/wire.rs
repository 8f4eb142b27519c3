//! Little-endian cursor used by the file-format parsers.

use crate::{Error, Result};

pub(crate) struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    format: &'static str,
}

impl<'a> Reader<'a> {
    pub fn new(bytes: &'a [u8], format: &'static str) -> Self {
        Reader {
            bytes,
            pos: 0,
            format,
        }
    }

    pub fn pos(&self) -> usize {
        self.pos
    }

    pub fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    pub fn take(&mut self, n: usize, chunk: &'static str) -> Result<&'a [u8]> {
        if self.remaining() < n {
            return Err(Error::Truncated {
                format: self.format,
                chunk,
                offset: self.pos,
            });
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn array<const N: usize>(&mut self, chunk: &'static str) -> Result<[u8; N]> {
        let mut out = [0u8; N];
        out.copy_from_slice(self.take(N, chunk)?);
        Ok(out)
    }

    pub fn u8(&mut self, chunk: &'static str) -> Result<u8> {
        Ok(self.array::<1>(chunk)?[0])
    }

    pub fn u16(&mut self, chunk: &'static str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.array(chunk)?))
    }

    pub fn u32(&mut self, chunk: &'static str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array(chunk)?))
    }

    pub fn i32(&mut self, chunk: &'static str) -> Result<i32> {
        Ok(i32::from_le_bytes(self.array(chunk)?))
    }

    pub fn u64(&mut self, chunk: &'static str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.array(chunk)?))
    }

    pub fn f32(&mut self, chunk: &'static str) -> Result<f32> {
        Ok(f32::from_le_bytes(self.array(chunk)?))
    }

    pub fn f64(&mut self, chunk: &'static str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.array(chunk)?))
    }

    /// Reads the magic and version and checks both.
    pub fn header(&mut self, magic: &[u8; 4], version: u16) -> Result<()> {
        if self.bytes.len() < 4 || &self.bytes[..4] != magic {
            return Err(Error::BadMagic {
                format: self.format,
            });
        }
        self.pos = 4;
        let found = self.u16("header")?;
        if found != version {
            return Err(Error::UnsupportedVersion {
                format: self.format,
                version: found,
            });
        }
        Ok(())
    }

    /// Rejects leftover bytes so parsing accounts for the whole input.
    pub fn finish(&self) -> Result<()> {
        if self.remaining() > 0 {
            return Err(Error::TrailingBytes {
                format: self.format,
                count: self.remaining(),
                offset: self.pos,
            });
        }
        Ok(())
    }

    pub fn malformed(&self, chunk: &'static str, offset: usize, reason: impl Into<String>) -> Error {
        Error::Malformed {
            format: self.format,
            chunk,
            offset,
            reason: reason.into(),
        }
    }
}
