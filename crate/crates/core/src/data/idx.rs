//! The IDX container: big-endian magic `0x0000 TT NN` (type, rank), `NN`
//! big-endian `u32` dimensions, then the raw payload. Only unsigned bytes
//! (`TT = 0x08`) are supported.

use std::fs;
use std::io::Read;
use std::path::Path;

use flate2::read::GzDecoder;

use crate::error::{Error, Result};

const UBYTE: u8 = 0x08;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxTensor {
    pub dims: Vec<usize>,
    pub data: Vec<u8>,
}

impl IdxTensor {
    pub fn len(&self) -> usize {
        self.dims.first().copied().unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Elements per leading index.
    pub fn item_size(&self) -> usize {
        self.dims.iter().skip(1).product()
    }
}

pub fn parse_idx(bytes: &[u8]) -> Result<IdxTensor> {
    if bytes.len() < 4 {
        return Err(Error::Idx(format!("file too short for a header ({} bytes)", bytes.len())));
    }
    if bytes[0] != 0 || bytes[1] != 0 {
        return Err(Error::Idx(format!(
            "bad magic {:02x}{:02x}{:02x}{:02x}",
            bytes[0], bytes[1], bytes[2], bytes[3]
        )));
    }
    if bytes[2] != UBYTE {
        return Err(Error::Idx(format!("unsupported element type 0x{:02x}", bytes[2])));
    }
    let rank = bytes[3] as usize;
    if rank == 0 {
        return Err(Error::Idx("rank 0 tensors are not supported".into()));
    }
    let header = 4 + 4 * rank;
    if bytes.len() < header {
        return Err(Error::IdxTruncated {
            expected: header,
            actual: bytes.len(),
        });
    }
    let dims: Vec<usize> = bytes[4..header]
        .chunks_exact(4)
        .map(|c| u32::from_be_bytes(c.try_into().unwrap()) as usize)
        .collect();
    let payload = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::Idx(format!("dimensions {dims:?} overflow")))?;
    let expected = header
        .checked_add(payload)
        .ok_or_else(|| Error::Idx(format!("dimensions {dims:?} overflow")))?;
    if bytes.len() < expected {
        return Err(Error::IdxTruncated {
            expected,
            actual: bytes.len(),
        });
    }
    if bytes.len() > expected {
        return Err(Error::Idx(format!(
            "{} trailing bytes after the declared payload",
            bytes.len() - expected
        )));
    }
    Ok(IdxTensor {
        dims,
        data: bytes[header..].to_vec(),
    })
}

/// Reads an IDX file, transparently gunzipping it when it starts with the gzip magic.
pub fn read_idx_file(path: &Path) -> Result<IdxTensor> {
    let raw = fs::read(path)?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice())
            .read_to_end(&mut out)
            .map_err(|e| Error::Idx(format!("{}: gzip: {e}", path.display())))?;
        parse_idx(&out)
    } else {
        parse_idx(&raw)
    }
}

/// Serialises an unsigned-byte tensor; the inverse of [`parse_idx`].
pub fn encode_idx(dims: &[usize], data: &[u8]) -> Vec<u8> {
    let mut out = vec![0, 0, UBYTE, dims.len() as u8];
    for &d in dims {
        out.extend_from_slice(&(d as u32).to_be_bytes());
    }
    out.extend_from_slice(data);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_image_file() {
        let bytes = [0, 0, 8, 3, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 1, 255];
        let t = parse_idx(&bytes).unwrap();
        assert_eq!(t.dims, vec![1, 1, 1]);
        assert_eq!(t.data, vec![255]);
    }

    #[test]
    fn label_file_and_round_trip() {
        let bytes = encode_idx(&[4], &[3, 1, 4, 1]);
        assert_eq!(&bytes[..8], &[0, 0, 8, 1, 0, 0, 0, 4]);
        let t = parse_idx(&bytes).unwrap();
        assert_eq!(t.data, vec![3, 1, 4, 1]);
        assert_eq!(t.len(), 4);
        assert_eq!(t.item_size(), 1);
    }

    #[test]
    fn truncated_payload_reports_sizes() {
        let mut bytes = encode_idx(&[2, 2, 2], &[0; 8]);
        bytes.pop();
        match parse_idx(&bytes) {
            Err(Error::IdxTruncated { expected, actual }) => {
                assert_eq!(expected, 16 + 8);
                assert_eq!(actual, 23);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bad_headers() {
        assert!(matches!(parse_idx(&[1, 0, 8, 1]), Err(Error::Idx(_))));
        assert!(matches!(parse_idx(&[0, 0, 0x0d, 1, 0, 0, 0, 0]), Err(Error::Idx(_))));
        assert!(matches!(parse_idx(&[0, 0, 8]), Err(Error::Idx(_))));
        assert!(matches!(parse_idx(&[0, 0, 8, 2, 0, 0]), Err(Error::IdxTruncated { .. })));
        let overflow = [0, 0, 8, 3, 255, 255, 255, 255, 255, 255, 255, 255, 255, 255, 255, 255];
        assert!(parse_idx(&overflow).is_err());
        let mut extra = encode_idx(&[1], &[1]);
        extra.push(0);
        assert!(parse_idx(&extra).is_err());
    }
}
