//! Raw little-endian `f64` matrices with JSON sidecars.
//!
//! A matrix `name` is stored as `name.bin` (row-major, 8 bytes per value)
//! next to `name.json`, which carries the shape and whatever metadata the
//! writer attaches.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

pub fn encode_f64_le(values: &[f64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(values.len() * 8);
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_f64_le(bytes: &[u8]) -> Result<Vec<f64>> {
    if !bytes.len().is_multiple_of(8) {
        return Err(Error::Format(format!("byte length {} is not a multiple of 8", bytes.len())));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect())
}

/// Paths of the binary payload and the sidecar for a stem like `out/noise`.
pub fn pair_paths(stem: &Path) -> (PathBuf, PathBuf) {
    (stem.with_extension("bin"), stem.with_extension("json"))
}

pub fn write_matrix<M: Serialize>(stem: &Path, values: &[f64], meta: &M) -> Result<()> {
    let (bin, json) = pair_paths(stem);
    if let Some(dir) = bin.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    fs::write(&bin, encode_f64_le(values))?;
    fs::write(&json, serde_json::to_vec_pretty(meta)?)?;
    Ok(())
}

pub fn read_matrix<M: DeserializeOwned>(stem: &Path) -> Result<(Vec<f64>, M)> {
    let (bin, json) = pair_paths(stem);
    let values = decode_f64_le(&fs::read(bin)?)?;
    let meta = serde_json::from_slice(&fs::read(json)?)?;
    Ok((values, meta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn layout_is_little_endian() {
        let bytes = encode_f64_le(&[1.0]);
        assert_eq!(bytes, 1.0f64.to_le_bytes().to_vec());
        assert_eq!(bytes[7], 0x3f);
    }

    #[test]
    fn rejects_truncated_payload() {
        assert!(decode_f64_le(&[0u8; 12]).is_err());
    }

    proptest! {
        #[test]
        fn encode_decode_is_bit_exact(v in proptest::collection::vec(any::<f64>(), 0..64)) {
            let back = decode_f64_le(&encode_f64_le(&v)).unwrap();
            prop_assert_eq!(v.len(), back.len());
            for (a, b) in v.iter().zip(&back) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }
}
