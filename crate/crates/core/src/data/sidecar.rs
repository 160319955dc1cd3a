//! Binary embedding sidecar.
//!
//! ```text
//! "CSSE"            4 bytes magic
//! version           u16 LE
//! repeated records:
//!   m               u32 LE
//!   d               u32 LE
//!   m*d values      f32 LE, row-major
//! ```
//!
//! A bundle line refers to its record with `{"sidecar_offset": <byte offset>}`,
//! the offset pointing at the record's `m` field.

use std::path::{Path, PathBuf};

use crate::data::FORMAT_VERSION;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"CSSE";
const HEADER_LEN: usize = 6;

/// Sidecar path paired with a bundle file: same stem, `.embed` extension.
pub fn sidecar_path(bundle_path: &Path) -> PathBuf {
    bundle_path.with_extension("embed")
}

pub struct SidecarWriter {
    buf: Vec<u8>,
}

impl Default for SidecarWriter {
    fn default() -> Self {
        Self::new()
    }
}

impl SidecarWriter {
    pub fn new() -> Self {
        let mut buf = Vec::with_capacity(1 << 16);
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        Self { buf }
    }

    /// Appends one `m × d` record and returns its byte offset. Values are
    /// narrowed to f32.
    pub fn append(&mut self, rows: &[Vec<f64>]) -> u64 {
        let offset = self.buf.len() as u64;
        let d = rows.first().map_or(0, |r| r.len());
        self.buf.extend_from_slice(&(rows.len() as u32).to_le_bytes());
        self.buf.extend_from_slice(&(d as u32).to_le_bytes());
        for v in rows.iter().flatten() {
            self.buf.extend_from_slice(&(*v as f32).to_le_bytes());
        }
        offset
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.buf
    }
}

pub struct SidecarReader {
    path: PathBuf,
    bytes: Vec<u8>,
}

impl SidecarReader {
    pub fn open(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(path.to_path_buf(), bytes)
    }

    pub fn from_bytes(path: PathBuf, bytes: Vec<u8>) -> Result<Self> {
        if bytes.len() < HEADER_LEN || &bytes[..4] != MAGIC {
            return Err(Error::Sidecar {
                path,
                message: "missing CSSE magic".into(),
            });
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != FORMAT_VERSION {
            return Err(Error::Sidecar {
                path,
                message: format!("unsupported version {version}"),
            });
        }
        Ok(Self { path, bytes })
    }

    /// Reads the record at `offset`, widening values to f64.
    pub fn read(&self, offset: u64) -> Result<Vec<Vec<f64>>> {
        let err = |message: String| Error::Sidecar {
            path: self.path.clone(),
            message,
        };
        let start = usize::try_from(offset).map_err(|_| err(format!("offset {offset} too large")))?;
        if start < HEADER_LEN || start + 8 > self.bytes.len() {
            return Err(err(format!("offset {offset} out of range")));
        }
        let word = |at: usize| {
            u32::from_le_bytes(self.bytes[at..at + 4].try_into().expect("4-byte slice")) as usize
        };
        let (m, d) = (word(start), word(start + 4));
        let body = start + 8;
        let len = m
            .checked_mul(d)
            .and_then(|n| n.checked_mul(4))
            .ok_or_else(|| err(format!("record at {offset} overflows")))?;
        if body + len > self.bytes.len() {
            return Err(err(format!(
                "record at {offset} ({m}x{d}) runs past end of file"
            )));
        }
        let values: Vec<f64> = self.bytes[body..body + len]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4-byte chunk")) as f64)
            .collect();
        Ok(if d == 0 {
            vec![Vec::new(); m]
        } else {
            values.chunks(d).map(|r| r.to_vec()).collect()
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout() {
        let mut w = SidecarWriter::new();
        let off = w.append(&[vec![1.0, 2.0], vec![3.0, 4.0]]);
        assert_eq!(off, 6);
        let bytes = w.into_bytes();
        assert_eq!(&bytes[..4], b"CSSE");
        assert_eq!(&bytes[4..6], &1u16.to_le_bytes());
        assert_eq!(&bytes[6..10], &2u32.to_le_bytes());
        assert_eq!(&bytes[10..14], &2u32.to_le_bytes());
        assert_eq!(&bytes[14..18], &1.0f32.to_le_bytes());
        assert_eq!(bytes.len(), 6 + 8 + 16);
    }

    #[test]
    fn read_back_two_records() {
        let mut w = SidecarWriter::new();
        let a = w.append(&vec![vec![0.5, -0.25, 1.0]; 2]);
        let b = w.append(&[vec![7.0], vec![8.0], vec![9.0]]);
        let r = SidecarReader::from_bytes("x.embed".into(), w.into_bytes()).unwrap();
        assert_eq!(r.read(a).unwrap(), vec![vec![0.5, -0.25, 1.0]; 2]);
        assert_eq!(r.read(b).unwrap(), vec![vec![7.0], vec![8.0], vec![9.0]]);
    }

    #[test]
    fn rejects_bad_magic_and_offsets() {
        assert!(SidecarReader::from_bytes("x".into(), b"NOPE\x01\x00".to_vec()).is_err());
        let mut w = SidecarWriter::new();
        w.append(&[vec![1.0]]);
        let r = SidecarReader::from_bytes("x".into(), w.into_bytes()).unwrap();
        assert!(r.read(0).is_err());
        assert!(r.read(100).is_err());
    }
}
