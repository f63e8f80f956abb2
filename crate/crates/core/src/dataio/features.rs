//! Server-held modality feature matrices and their `GMF1` binary format.
//!
//! Layout (all little-endian): magic `GMF1`, `u32` version (= 1), `u32` k,
//! then per modality `u32` rows, `u32` cols and `rows * cols` `f32` values in
//! row-major order.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::numerics::Matrix;

pub const FEATURE_MAGIC: &[u8; 4] = b"GMF1";
pub const FEATURE_VERSION: u32 = 1;

/// `k` per-item embedding matrices, each `M x d1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalityFeatures {
    modalities: Vec<Matrix>,
}

impl ModalityFeatures {
    pub fn new(modalities: Vec<Matrix>) -> Result<Self> {
        let first = modalities
            .first()
            .ok_or_else(|| Error::invalid("at least one modality is required"))?;
        let rows = first.rows();
        for (m, mat) in modalities.iter().enumerate() {
            if mat.rows() != rows {
                return Err(Error::Format {
                    modality: Some(m),
                    detail: format!("has {} rows, modality 0 has {rows}", mat.rows()),
                });
            }
            if !mat.is_finite() {
                return Err(Error::Format {
                    modality: Some(m),
                    detail: "non-finite entry".into(),
                });
            }
        }
        Ok(Self { modalities })
    }

    pub fn num_modalities(&self) -> usize {
        self.modalities.len()
    }

    pub fn num_items(&self) -> usize {
        self.modalities[0].rows()
    }

    /// Width of modality `m`.
    pub fn dim(&self, m: usize) -> usize {
        self.modalities[m].cols()
    }

    pub fn modality(&self, m: usize) -> &Matrix {
        &self.modalities[m]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Matrix> {
        self.modalities.iter()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let total: usize = self.modalities.iter().map(Matrix::len).sum();
        let mut out = Vec::with_capacity(12 + 8 * self.modalities.len() + 4 * total);
        out.extend_from_slice(FEATURE_MAGIC);
        out.extend_from_slice(&FEATURE_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.modalities.len() as u32).to_le_bytes());
        for mat in &self.modalities {
            out.extend_from_slice(&(mat.rows() as u32).to_le_bytes());
            out.extend_from_slice(&(mat.cols() as u32).to_le_bytes());
            for &x in mat.as_slice() {
                out.extend_from_slice(&(x as f32).to_le_bytes());
            }
        }
        out
    }
}

/// Header facts of a feature file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureHeader {
    /// `(rows, cols)` per modality.
    pub shapes: Vec<(usize, usize)>,
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, modality: Option<usize>) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::Format {
                modality,
                detail: format!("truncated at byte {}", self.buf.len()),
            });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, modality: Option<usize>) -> Result<u32> {
        let b = self.take(4, modality)?;
        Ok(u32::from_le_bytes(b.try_into().unwrap()))
    }
}

fn read_preamble(reader: &mut Reader<'_>) -> Result<usize> {
    if reader.take(4, None)? != FEATURE_MAGIC {
        return Err(Error::Format {
            modality: None,
            detail: "bad magic, expected GMF1".into(),
        });
    }
    let version = reader.u32(None)?;
    if version != FEATURE_VERSION {
        return Err(Error::Format {
            modality: None,
            detail: format!("unsupported version {version}"),
        });
    }
    let k = reader.u32(None)? as usize;
    if k == 0 {
        return Err(Error::Format {
            modality: None,
            detail: "zero modalities".into(),
        });
    }
    Ok(k)
}

/// Parses `GMF1` bytes, requiring every modality to have `expected_items` rows.
pub fn parse_modality_features(bytes: &[u8], expected_items: usize) -> Result<ModalityFeatures> {
    let mut reader = Reader { buf: bytes, pos: 0 };
    let k = read_preamble(&mut reader)?;
    let mut modalities = Vec::with_capacity(k);
    for m in 0..k {
        let rows = reader.u32(Some(m))? as usize;
        let cols = reader.u32(Some(m))? as usize;
        if rows != expected_items {
            return Err(Error::Format {
                modality: Some(m),
                detail: format!("has {rows} rows, expected {expected_items}"),
            });
        }
        if cols == 0 {
            return Err(Error::Format {
                modality: Some(m),
                detail: "zero width".into(),
            });
        }
        let raw = reader.take(rows * cols * 4, Some(m))?;
        let mut data = Vec::with_capacity(rows * cols);
        for chunk in raw.chunks_exact(4) {
            let x = f32::from_le_bytes(chunk.try_into().unwrap());
            if !x.is_finite() {
                return Err(Error::Format {
                    modality: Some(m),
                    detail: "non-finite entry".into(),
                });
            }
            data.push(f64::from(x));
        }
        modalities.push(Matrix::from_vec(rows, cols, data)?);
    }
    if reader.pos != bytes.len() {
        return Err(Error::Format {
            modality: None,
            detail: format!("{} trailing bytes", bytes.len() - reader.pos),
        });
    }
    ModalityFeatures::new(modalities)
}

pub fn load_modality_features(path: &Path, expected_items: usize) -> Result<ModalityFeatures> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_modality_features(&bytes, expected_items)
}

/// Reads only the shapes from a feature file.
pub fn read_feature_header(path: &Path) -> Result<FeatureHeader> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut reader = Reader { buf: &bytes, pos: 0 };
    let k = read_preamble(&mut reader)?;
    let mut shapes = Vec::with_capacity(k);
    for m in 0..k {
        let rows = reader.u32(Some(m))? as usize;
        let cols = reader.u32(Some(m))? as usize;
        reader.take(rows * cols * 4, Some(m))?;
        shapes.push((rows, cols));
    }
    Ok(FeatureHeader { shapes })
}

pub fn write_modality_features(path: &Path, features: &ModalityFeatures) -> Result<()> {
    fs::write(path, features.to_bytes()).map_err(|e| Error::io(path, e))
}
