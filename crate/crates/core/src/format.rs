//! SVRT binary tensor container, version 1.
//!
//! ```text
//! offset  size      field
//! 0       4         magic  b"SVRT"
//! 4       2         version, u16 LE (= 1)
//! 6       1         dtype code (0 = f32 little-endian)
//! 7       1         rank r (1..=4)
//! 8       4·r       dims, u32 LE each, every dim >= 1
//! 8+4r    4·Πdims   payload, f32 LE, row-major
//! ```
//!
//! Writers always emit rank 4. Readers accept ranks 1..=4 and left-pad the
//! shape with ones. The whole header, including the payload length, is
//! validated before the payload is decoded.

use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::tensor::{Dims4, Tensor4};

pub const MAGIC: &[u8; 4] = b"SVRT";
pub const VERSION: u16 = 1;
pub const DTYPE_F32_LE: u8 = 0;
const FIXED_HEADER: usize = 8;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("bad magic at byte 0: {found:02x?}")]
    BadMagic { found: Vec<u8> },
    #[error("unsupported version {found} at byte 4")]
    UnsupportedVersion { found: u16 },
    #[error("unsupported dtype code {found} at byte 6")]
    UnsupportedDtype { found: u8 },
    #[error("unsupported rank {found} at byte 7")]
    BadRank { found: u8 },
    #[error("zero dimension at byte {offset}")]
    ZeroDim { offset: usize },
    #[error("truncated at byte {offset}: need {needed} bytes, file has {available}")]
    Truncated { offset: usize, needed: usize, available: usize },
    #[error("{extra} trailing bytes after payload at byte {offset}")]
    TrailingBytes { offset: usize, extra: usize },
    #[error("non-finite payload value at byte {offset}")]
    NonFinite { offset: usize },
    #[error("dims overflow at byte {offset}")]
    Overflow { offset: usize },
}

impl FormatError {
    fn io(path: &Path, source: io::Error) -> Self {
        Self::Io { path: path.to_path_buf(), source }
    }
}

/// Serializes a tensor to SVRT bytes.
pub fn encode_tensor(t: &Tensor4) -> Vec<u8> {
    let dims = t.dims().as_array();
    let mut out = Vec::with_capacity(FIXED_HEADER + 16 + 4 * t.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(DTYPE_F32_LE);
    out.push(4);
    for d in dims {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for v in t.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn need(bytes: &[u8], offset: usize, len: usize) -> Result<(), FormatError> {
    if bytes.len() < offset + len {
        return Err(FormatError::Truncated { offset, needed: offset + len, available: bytes.len() });
    }
    Ok(())
}

/// Parses SVRT bytes, validating the full header before touching the payload.
pub fn decode_tensor(bytes: &[u8]) -> Result<Tensor4, FormatError> {
    need(bytes, 0, 4)?;
    if &bytes[0..4] != MAGIC {
        return Err(FormatError::BadMagic { found: bytes[0..4].to_vec() });
    }
    need(bytes, 4, 4)?;
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != VERSION {
        return Err(FormatError::UnsupportedVersion { found: version });
    }
    if bytes[6] != DTYPE_F32_LE {
        return Err(FormatError::UnsupportedDtype { found: bytes[6] });
    }
    let rank = bytes[7];
    if !(1..=4).contains(&rank) {
        return Err(FormatError::BadRank { found: rank });
    }
    let rank = rank as usize;
    need(bytes, FIXED_HEADER, 4 * rank)?;
    let mut dims = [1usize; 4];
    let mut numel: usize = 1;
    for i in 0..rank {
        let offset = FIXED_HEADER + 4 * i;
        let d = u32::from_le_bytes(bytes[offset..offset + 4].try_into().expect("4 bytes")) as usize;
        if d == 0 {
            return Err(FormatError::ZeroDim { offset });
        }
        numel = numel.checked_mul(d).ok_or(FormatError::Overflow { offset })?;
        dims[4 - rank + i] = d;
    }
    let payload_at = FIXED_HEADER + 4 * rank;
    let payload_len = numel.checked_mul(4).ok_or(FormatError::Overflow { offset: payload_at })?;
    need(bytes, payload_at, payload_len)?;
    let end = payload_at + payload_len;
    if bytes.len() > end {
        return Err(FormatError::TrailingBytes { offset: end, extra: bytes.len() - end });
    }
    let mut data = Vec::with_capacity(numel);
    for (i, chunk) in bytes[payload_at..end].chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes(chunk.try_into().expect("4 bytes"));
        if !v.is_finite() {
            return Err(FormatError::NonFinite { offset: payload_at + 4 * i });
        }
        data.push(v);
    }
    Ok(Tensor4::new(Dims4::from_array(dims), data).expect("validated header"))
}

/// Writes via a temporary file in the target directory, renamed on success.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    use std::io::Write;
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

pub fn write_tensor(path: impl AsRef<Path>, t: &Tensor4) -> Result<(), FormatError> {
    let path = path.as_ref();
    write_atomic(path, &encode_tensor(t)).map_err(|e| FormatError::io(path, e))
}

pub fn read_tensor(path: impl AsRef<Path>) -> Result<Tensor4, FormatError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| FormatError::io(path, e))?;
    decode_tensor(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_tensor_layout() {
        let t = Tensor4::zeros(Dims4::new(1, 1, 2, 2)).unwrap();
        let b = encode_tensor(&t);
        assert_eq!(&b[0..4], b"SVRT");
        assert_eq!(&b[4..8], &[1, 0, 0, 4]);
        assert_eq!(&b[8..24], &[1, 0, 0, 0, 1, 0, 0, 0, 2, 0, 0, 0, 2, 0, 0, 0]);
        assert_eq!(b.len(), 24 + 16);
        assert!(b[24..].iter().all(|&x| x == 0));
    }

    #[test]
    fn seeded_roundtrip_is_bit_equal() {
        let t = Tensor4::randn(Dims4::new(3, 2, 4, 4), 99).unwrap();
        let back = decode_tensor(&encode_tensor(&t)).unwrap();
        assert!(t.bit_eq(&back));
    }

    #[test]
    fn lower_rank_is_left_padded() {
        let mut b = Vec::new();
        b.extend_from_slice(MAGIC);
        b.extend_from_slice(&VERSION.to_le_bytes());
        b.extend_from_slice(&[0, 2]);
        b.extend_from_slice(&3u32.to_le_bytes());
        b.extend_from_slice(&2u32.to_le_bytes());
        for i in 0..6 {
            b.extend_from_slice(&(i as f32).to_le_bytes());
        }
        let t = decode_tensor(&b).unwrap();
        assert_eq!(t.dims(), Dims4::new(1, 1, 3, 2));
        assert_eq!(t.get(0, 0, 2, 1), 5.0);
    }

    #[test]
    fn header_errors_carry_offsets() {
        let good = encode_tensor(&Tensor4::zeros(Dims4::new(1, 1, 2, 2)).unwrap());

        let mut bad = good.clone();
        bad[0] = b'X';
        assert!(matches!(decode_tensor(&bad), Err(FormatError::BadMagic { .. })));

        let mut bad = good.clone();
        bad[4] = 2;
        assert!(matches!(decode_tensor(&bad), Err(FormatError::UnsupportedVersion { found: 2 })));

        let mut bad = good.clone();
        bad[6] = 1;
        assert!(matches!(decode_tensor(&bad), Err(FormatError::UnsupportedDtype { found: 1 })));

        let mut bad = good.clone();
        bad[7] = 5;
        assert!(matches!(decode_tensor(&bad), Err(FormatError::BadRank { found: 5 })));

        let mut bad = good.clone();
        bad[12..16].copy_from_slice(&0u32.to_le_bytes());
        assert!(matches!(decode_tensor(&bad), Err(FormatError::ZeroDim { offset: 12 })));

        let bad = &good[..good.len() - 1];
        assert!(matches!(
            decode_tensor(bad),
            Err(FormatError::Truncated { offset: 24, needed: 40, available: 39 })
        ));

        let mut bad = good.clone();
        bad.push(0);
        assert!(matches!(decode_tensor(&bad), Err(FormatError::TrailingBytes { offset: 40, extra: 1 })));

        let mut bad = good.clone();
        bad[28..32].copy_from_slice(&f32::NAN.to_le_bytes());
        assert!(matches!(decode_tensor(&bad), Err(FormatError::NonFinite { offset: 28 })));

        // A header claiming a huge payload fails on length before any allocation.
        let mut bad = good.clone();
        bad[8..12].copy_from_slice(&u32::MAX.to_le_bytes());
        assert!(matches!(decode_tensor(&bad), Err(FormatError::Truncated { .. })));
    }

    #[test]
    fn file_roundtrip_and_missing_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.svrt");
        let t = Tensor4::randn(Dims4::new(2, 1, 3, 5), 1).unwrap();
        write_tensor(&p, &t).unwrap();
        assert!(read_tensor(&p).unwrap().bit_eq(&t));
        assert!(matches!(read_tensor(dir.path().join("nope.svrt")), Err(FormatError::Io { .. })));
    }
}
