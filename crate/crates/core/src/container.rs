//! Versioned binary container shared by dataset and model files.
//!
//! ```text
//! magic        4 bytes
//! version      u32 LE
//! meta_len     u64 LE
//! meta         meta_len bytes of UTF-8 TOML
//! count        u64 LE
//! payload      count x f64 LE
//! checksum     u64 LE, first 8 bytes of SHA-256 over everything above
//! ```

use std::io::Write;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub struct Container {
    pub meta: String,
    pub payload: Vec<f64>,
    pub checksum: u64,
}

/// First eight bytes of SHA-256, read little-endian.
pub fn checksum64(bytes: &[u8]) -> u64 {
    let digest = Sha256::digest(bytes);
    u64::from_le_bytes(digest[..8].try_into().expect("digest length"))
}

/// Hex SHA-256 of a byte string; used for manifests and provenance.
pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn encode(magic: &[u8; 4], version: u32, meta: &str, payload: &[f64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(32 + meta.len() + payload.len() * 8);
    out.extend_from_slice(magic);
    out.extend_from_slice(&version.to_le_bytes());
    out.extend_from_slice(&(meta.len() as u64).to_le_bytes());
    out.extend_from_slice(meta.as_bytes());
    out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    for v in payload {
        out.extend_from_slice(&v.to_le_bytes());
    }
    let sum = checksum64(&out);
    out.extend_from_slice(&sum.to_le_bytes());
    out
}

pub fn decode(bytes: &[u8], magic: &'static [u8; 4], version: u32) -> Result<Container> {
    let mut cur = Cursor { bytes, pos: 0 };
    if cur.take(4)? != magic {
        return Err(Error::BadMagic { expected: std::str::from_utf8(magic).unwrap_or("?") });
    }
    let found = cur.u32()?;
    if found != version {
        return Err(Error::FormatVersionMismatch { found, expected: version });
    }
    let meta_len = cur.u64()? as usize;
    let meta_bytes = cur.take(meta_len)?;
    let count = cur.u64()? as usize;
    let payload_bytes = cur.take(count.checked_mul(8).ok_or(Error::TruncatedFile)?)?;
    let body_end = cur.pos;
    let stored = cur.u64()?;
    let computed = checksum64(&bytes[..body_end]);
    if stored != computed {
        return Err(Error::ChecksumMismatch { stored, computed });
    }
    if cur.pos != bytes.len() {
        return Err(Error::Metadata(format!("{} trailing bytes after checksum", bytes.len() - cur.pos)));
    }
    let meta = String::from_utf8(meta_bytes.to_vec()).map_err(|e| Error::Metadata(e.to_string()))?;
    let payload = payload_bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Ok(Container { meta, payload, checksum: stored })
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).ok_or(Error::TruncatedFile)?;
        let out = self.bytes.get(self.pos..end).ok_or(Error::TruncatedFile)?;
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}
