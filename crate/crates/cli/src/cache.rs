//! Feature cache files.
//!
//! ```text
//! "TSRF" | version u32 | name length u32 | pipeline name (UTF-8) | seed u64
//! | dim u32 | count u32 | count x (label u32, f32[dim]) | CRC32 of all preceding bytes
//! ```
//!
//! All integers and floats are little-endian.

use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

pub const CACHE_MAGIC: &[u8; 4] = b"TSRF";
pub const CACHE_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CacheError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("bad magic {0:?}")]
    BadMagic([u8; 4]),
    #[error("unsupported cache version {0}")]
    VersionMismatch(u32),
    #[error("checksum mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    ChecksumMismatch { stored: u32, computed: u32 },
    #[error("truncated cache payload")]
    Truncated,
    #[error("malformed cache: {0}")]
    Malformed(String),
    #[error("row of length {actual} in a cache of dim {expected}")]
    DimensionMismatch { expected: usize, actual: usize },
}

/// Labeled feature rows for one pipeline, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureCache {
    pub pipeline: String,
    pub seed: u64,
    dim: usize,
    labels: Vec<u32>,
    values: Vec<f32>,
}

impl FeatureCache {
    pub fn new(pipeline: impl Into<String>, seed: u64, dim: usize) -> Self {
        Self {
            pipeline: pipeline.into(),
            seed,
            dim,
            labels: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn push(&mut self, label: u32, row: &[f32]) -> Result<(), CacheError> {
        if row.len() != self.dim {
            return Err(CacheError::DimensionMismatch {
                expected: self.dim,
                actual: row.len(),
            });
        }
        self.labels.push(label);
        self.values.extend_from_slice(row);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> Vec<&[f32]> {
        (0..self.len()).map(|i| self.row(i)).collect()
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(
            32 + self.pipeline.len() + self.values.len() * 4 + self.labels.len() * 4,
        );
        out.extend_from_slice(CACHE_MAGIC);
        out.extend_from_slice(&CACHE_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.pipeline.len() as u32).to_le_bytes());
        out.extend_from_slice(self.pipeline.as_bytes());
        out.extend_from_slice(&self.seed.to_le_bytes());
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        out.extend_from_slice(&(self.len() as u32).to_le_bytes());
        for i in 0..self.len() {
            out.extend_from_slice(&self.labels[i].to_le_bytes());
            for v in self.row(i) {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, CacheError> {
        if bytes.len() < 8 {
            return Err(CacheError::Truncated);
        }
        let magic: [u8; 4] = bytes[..4].try_into().expect("4 bytes");
        if &magic != CACHE_MAGIC {
            return Err(CacheError::BadMagic(magic));
        }
        let (body, tail) = bytes.split_at(bytes.len() - 4);
        let stored = u32::from_le_bytes(tail.try_into().expect("4 bytes"));
        let computed = crc32fast::hash(body);
        if stored != computed {
            return Err(CacheError::ChecksumMismatch { stored, computed });
        }
        let mut pos: usize = 4;
        let mut take = |n: usize| -> Result<&[u8], CacheError> {
            let end = pos
                .checked_add(n)
                .filter(|&e| e <= body.len())
                .ok_or(CacheError::Truncated)?;
            let s = &body[pos..end];
            pos = end;
            Ok(s)
        };
        let u32_at = |b: &[u8]| u32::from_le_bytes(b.try_into().expect("4 bytes"));
        let version = u32_at(take(4)?);
        if version != CACHE_VERSION {
            return Err(CacheError::VersionMismatch(version));
        }
        let name_len = u32_at(take(4)?) as usize;
        let pipeline = String::from_utf8(take(name_len)?.to_vec())
            .map_err(|_| CacheError::Malformed("pipeline name is not UTF-8".into()))?;
        let seed = u64::from_le_bytes(take(8)?.try_into().expect("8 bytes"));
        let dim = u32_at(take(4)?) as usize;
        let count = u32_at(take(4)?) as usize;
        let row_bytes = 4 + 4 * dim;
        let payload = take(count.checked_mul(row_bytes).ok_or(CacheError::Truncated)?)?;
        let mut cache = FeatureCache::new(pipeline, seed, dim);
        cache.labels.reserve(count);
        cache.values.reserve(count * dim);
        for row in payload.chunks_exact(row_bytes) {
            cache.labels.push(u32_at(&row[..4]));
            cache.values.extend(
                row[4..]
                    .chunks_exact(4)
                    .map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes"))),
            );
        }
        if take(1).is_ok() {
            return Err(CacheError::Malformed(
                "trailing bytes after the last row".into(),
            ));
        }
        Ok(cache)
    }

    pub fn write(&self, path: &Path) -> Result<(), CacheError> {
        fs::write(path, self.encode()).map_err(|source| CacheError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn read(path: &Path) -> Result<Self, CacheError> {
        let bytes = fs::read(path).map_err(|source| CacheError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::decode(&bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> FeatureCache {
        let mut c = FeatureCache::new("YUV-HOG", 42, 3);
        c.push(7, &[0.0, 0.5, 1.0]).unwrap();
        c.push(0, &[f32::MIN_POSITIVE, -0.0, 0.25]).unwrap();
        c
    }

    #[test]
    fn round_trip() {
        let c = sample();
        let bytes = c.encode();
        let back = FeatureCache::decode(&bytes).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.encode(), bytes);
        assert_eq!(back.row(1)[1].to_bits(), (-0.0f32).to_bits());
    }

    #[test]
    fn layout() {
        let bytes = sample().encode();
        assert_eq!(&bytes[..4], b"TSRF");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 7);
        assert_eq!(&bytes[12..19], b"YUV-HOG");
        assert_eq!(bytes.len(), 4 + 4 + 4 + 7 + 8 + 4 + 4 + 2 * (4 + 12) + 4);
    }

    #[test]
    fn corruption_detected() {
        let mut bytes = sample().encode();
        let n = bytes.len();
        bytes[n - 10] ^= 1;
        assert!(matches!(
            FeatureCache::decode(&bytes),
            Err(CacheError::ChecksumMismatch { .. })
        ));
        assert!(matches!(
            FeatureCache::decode(b"TSRM\0\0\0\0\0\0\0\0"),
            Err(CacheError::BadMagic(_))
        ));
        assert!(matches!(
            FeatureCache::decode(b"TSR"),
            Err(CacheError::Truncated)
        ));
    }

    #[test]
    fn declared_count_checked() {
        let mut bytes = sample().encode();
        bytes.truncate(bytes.len() - 4);
        let count_at = 4 + 4 + 4 + 7 + 8 + 4;
        bytes[count_at..count_at + 4].copy_from_slice(&3u32.to_le_bytes());
        let crc = crc32fast::hash(&bytes);
        bytes.extend_from_slice(&crc.to_le_bytes());
        assert!(matches!(
            FeatureCache::decode(&bytes),
            Err(CacheError::Truncated)
        ));
    }

    #[test]
    fn push_checks_dim() {
        let mut c = FeatureCache::new("HOG", 0, 2);
        assert!(matches!(
            c.push(0, &[1.0]),
            Err(CacheError::DimensionMismatch {
                expected: 2,
                actual: 1
            })
        ));
    }
}
