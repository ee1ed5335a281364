//! Feature matrices and the FVEC interchange format.
//!
//! FVEC layout, little-endian, no padding and no footer:
//!
//! | offset | size | field                         |
//! |--------|------|-------------------------------|
//! | 0      | 4    | magic `b"FVEC"`               |
//! | 4      | 4    | `u32` version, always 1       |
//! | 8      | 8    | `u64` rows                    |
//! | 16     | 8    | `u64` cols                    |
//! | 24     | 4·rows·cols | `f32` values, row-major |

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const FVEC_MAGIC: [u8; 4] = *b"FVEC";
pub const FVEC_VERSION: u32 = 1;
pub const FVEC_HEADER_LEN: usize = 24;

/// Dense row-major N×D matrix of finite `f32` feature vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f32>,
}

impl FeatureMatrix {
    /// Builds a matrix, checking shape and finiteness.
    pub fn new(rows: usize, cols: usize, data: Vec<f32>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::EmptyMatrix);
        }
        let expected = rows
            .checked_mul(cols)
            .ok_or(Error::DimensionOverflow {
                rows: rows as u64,
                cols: cols as u64,
            })?;
        if data.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: data.len(),
            });
        }
        check_finite(&data, cols)?;
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from `f64` rows, rounding to `f32` storage.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::EmptyMatrix);
        }
        let d = rows[0].as_ref().len();
        let mut data = Vec::with_capacity(n * d);
        for r in rows {
            let r = r.as_ref();
            if r.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: r.len(),
                });
            }
            data.extend(r.iter().map(|&v| v as f32));
        }
        Self::new(n, d, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Row `i` widened to `f64`.
    pub fn row_f64(&self, i: usize) -> Vec<f64> {
        self.row(i).iter().map(|&v| v as f64).collect()
    }

    pub fn iter_rows(&self) -> impl ExactSizeIterator<Item = &[f32]> + '_ {
        self.data.chunks_exact(self.cols)
    }

    /// New matrix made of the given rows, in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> Result<Self> {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            if i >= self.rows {
                return Err(Error::InvalidParameter(format!(
                    "row index {i} out of range for {} rows",
                    self.rows
                )));
            }
            data.extend_from_slice(self.row(i));
        }
        Self::new(indices.len(), self.cols, data)
    }

    /// Serializes to FVEC bytes.
    pub fn to_fvec_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(FVEC_HEADER_LEN + 4 * self.data.len());
        out.extend_from_slice(&FVEC_MAGIC);
        out.extend_from_slice(&FVEC_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.rows as u64).to_le_bytes());
        out.extend_from_slice(&(self.cols as u64).to_le_bytes());
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    /// Parses FVEC bytes.
    pub fn from_fvec_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 4 || bytes[..4] != FVEC_MAGIC {
            return Err(Error::BadMagic);
        }
        if bytes.len() < FVEC_HEADER_LEN {
            return Err(Error::TruncatedPayload {
                expected: 0,
                found: 0,
            });
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != FVEC_VERSION {
            return Err(Error::BadVersion(version));
        }
        let rows = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
        let cols = u64::from_le_bytes(bytes[16..24].try_into().unwrap());
        let overflow = Error::DimensionOverflow { rows, cols };
        let count = rows.checked_mul(cols).ok_or(overflow)?;
        let payload = &bytes[FVEC_HEADER_LEN..];
        let found = (payload.len() / 4) as u64;
        if count.checked_mul(4).is_none() || (payload.len() as u64) < count * 4 {
            return Err(Error::TruncatedPayload {
                expected: count,
                found,
            });
        }
        if payload.len() as u64 > count * 4 {
            return Err(Error::TrailingBytes(payload.len() as u64 - count * 4));
        }
        let (rows, cols) = match (usize::try_from(rows), usize::try_from(cols)) {
            (Ok(r), Ok(c)) => (r, c),
            _ => return Err(Error::DimensionOverflow { rows, cols }),
        };
        let data = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Self::new(rows, cols, data)
    }
}

fn check_finite(data: &[f32], cols: usize) -> Result<()> {
    match data.iter().position(|v| !v.is_finite()) {
        Some(k) => Err(Error::NonFinite {
            row: k / cols,
            col: k % cols,
        }),
        None => Ok(()),
    }
}

/// Writes `matrix` to `path` in FVEC format.
pub fn write_features(matrix: &FeatureMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    check_finite(&matrix.data, matrix.cols)?;
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(&matrix.to_fvec_bytes())
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

/// Reads an FVEC file.
pub fn read_features(path: impl AsRef<Path>) -> Result<FeatureMatrix> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    FeatureMatrix::from_fvec_bytes(&bytes)
}
