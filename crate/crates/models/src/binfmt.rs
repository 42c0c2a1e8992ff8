//! Shared envelope for the binary model files: a 4-byte magic, a `u16`
//! version, a `u8` scalar width (4 or 8), the body, and a CRC32 over
//! everything before it. Integers and floats are little-endian; floats are
//! stored as raw IEEE bits so a round trip is bit-exact.

use std::path::Path;

use twin_core::Scalar;

use crate::error::{ModelError, Result};

const HEADER: usize = 7;

pub(crate) fn width_of<T: Scalar>() -> u8 {
    std::mem::size_of::<T>() as u8
}

pub(crate) struct Enc {
    buf: Vec<u8>,
}

impl Enc {
    pub fn new<T: Scalar>(magic: &[u8; 4], version: u16) -> Self {
        let mut buf = Vec::with_capacity(1024);
        buf.extend_from_slice(magic);
        buf.extend_from_slice(&version.to_le_bytes());
        buf.push(width_of::<T>());
        Enc { buf }
    }

    pub fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn u32(&mut self, v: usize) {
        let v = u32::try_from(v).expect("count fits in u32");
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn scalar<T: Scalar>(&mut self, v: T) {
        if width_of::<T>() == 8 {
            self.buf.extend_from_slice(&v.as_f64().to_le_bytes());
        } else {
            self.buf.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
        }
    }

    pub fn scalars<T: Scalar>(&mut self, v: &[T]) {
        self.u32(v.len());
        for x in v {
            self.scalar(*x);
        }
    }

    pub fn str(&mut self, s: &str) {
        self.u32(s.len());
        self.buf.extend_from_slice(s.as_bytes());
    }

    pub fn finish(mut self) -> Vec<u8> {
        let crc = crc32fast::hash(&self.buf);
        self.buf.extend_from_slice(&crc.to_le_bytes());
        self.buf
    }
}

pub(crate) struct Dec<'a> {
    buf: &'a [u8],
    pos: usize,
    what: &'static str,
}

impl<'a> Dec<'a> {
    /// Checks magic, CRC, version and scalar width; returns the version.
    pub fn open<T: Scalar>(data: &'a [u8], magic: &[u8; 4], max_version: u16, what: &'static str) -> Result<(Self, u16)> {
        if data.len() < HEADER + 4 {
            return Err(ModelError::format(what, "file too short"));
        }
        if &data[..4] != magic {
            return Err(ModelError::format(what, "bad magic"));
        }
        let (body, tail) = data.split_at(data.len() - 4);
        let stored = u32::from_le_bytes(tail.try_into().expect("4 bytes"));
        if crc32fast::hash(body) != stored {
            return Err(ModelError::format(what, "checksum mismatch"));
        }
        let version = u16::from_le_bytes([data[4], data[5]]);
        if version == 0 || version > max_version {
            return Err(ModelError::format(what, format!("unsupported version {version}")));
        }
        if data[6] != width_of::<T>() {
            return Err(ModelError::format(
                what,
                format!("stored with {}-byte scalars, reading as {}", data[6], width_of::<T>()),
            ));
        }
        Ok((Dec { buf: body, pos: HEADER, what }, version))
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(ModelError::format(self.what, "truncated body"));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")) as usize)
    }

    pub fn scalar<T: Scalar>(&mut self) -> Result<T> {
        if width_of::<T>() == 8 {
            Ok(T::lit(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes"))))
        } else {
            Ok(T::lit(f32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")) as f64))
        }
    }

    pub fn scalars<T: Scalar>(&mut self) -> Result<Vec<T>> {
        let n = self.u32()?;
        if n > self.buf.len() {
            return Err(ModelError::format(self.what, "implausible length"));
        }
        (0..n).map(|_| self.scalar()).collect()
    }

    pub fn str(&mut self) -> Result<String> {
        let n = self.u32()?;
        let bytes = self.take(n)?;
        String::from_utf8(bytes.to_vec()).map_err(|_| ModelError::format(self.what, "string is not UTF-8"))
    }

    pub fn error(&self, detail: impl Into<String>) -> ModelError {
        ModelError::format(self.what, detail)
    }

    pub fn done(&self) -> Result<()> {
        if self.pos == self.buf.len() {
            Ok(())
        } else {
            Err(ModelError::format(self.what, "trailing bytes"))
        }
    }
}

/// Writes via a sibling temp file and rename.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| ModelError::io(dir, e))?;
    }
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes).map_err(|e| ModelError::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| ModelError::io(path, e))
}

pub(crate) fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| ModelError::io(path, e))
}
