//! Raw tensor file format: one JSON header line, then a little-endian f32 blob.
//!
//! The header pins `{shape, dtype, order, endian}` plus free-form metadata,
//! so exported images, localization maps, and weight panels are
//! self-describing.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read, Write};
use thiserror::Error;

pub const DTYPE_F32: &str = "f32";
pub const ORDER_ROW_MAJOR: &str = "row-major";
pub const ENDIAN_LITTLE: &str = "little";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TensorHeader {
    pub shape: Vec<usize>,
    pub dtype: String,
    pub order: String,
    pub endian: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub meta: BTreeMap<String, serde_json::Value>,
}

impl TensorHeader {
    pub fn f32_row_major(shape: Vec<usize>) -> Self {
        Self {
            shape,
            dtype: DTYPE_F32.into(),
            order: ORDER_ROW_MAJOR.into(),
            endian: ENDIAN_LITTLE.into(),
            meta: BTreeMap::new(),
        }
    }

    pub fn with_meta(mut self, key: &str, value: serde_json::Value) -> Self {
        self.meta.insert(key.to_string(), value);
        self
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Error)]
pub enum BlobError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad header: {0}")]
    Header(#[from] serde_json::Error),
    #[error("unsupported dtype {0:?}")]
    Dtype(String),
    #[error("unsupported order {0:?}")]
    Order(String),
    #[error("unsupported endianness {0:?}")]
    Endian(String),
    #[error("blob length {got} bytes does not match shape ({want} bytes)")]
    Length { got: usize, want: usize },
    #[error("shape product overflows")]
    ShapeOverflow,
}

/// Write `header` then `data` (little-endian f32). `data.len()` must equal
/// the shape product.
pub fn write_tensor<W: Write>(
    mut w: W,
    header: &TensorHeader,
    data: &[f32],
) -> Result<(), BlobError> {
    assert_eq!(data.len(), header.len(), "data length vs header shape");
    serde_json::to_writer(&mut w, header)?;
    w.write_all(b"\n")?;
    let mut buf = Vec::with_capacity(data.len() * 4);
    for v in data {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

/// Read a tensor written by [`write_tensor`].
pub fn read_tensor<R: Read>(r: R) -> Result<(TensorHeader, Vec<f32>), BlobError> {
    let mut r = BufReader::new(r);
    let mut line = String::new();
    r.read_line(&mut line)?;
    let header: TensorHeader = serde_json::from_str(line.trim_end())?;
    if header.dtype != DTYPE_F32 {
        return Err(BlobError::Dtype(header.dtype));
    }
    if header.order != ORDER_ROW_MAJOR {
        return Err(BlobError::Order(header.order));
    }
    if header.endian != ENDIAN_LITTLE {
        return Err(BlobError::Endian(header.endian));
    }
    let n = header
        .shape
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or(BlobError::ShapeOverflow)?;
    let want = n.checked_mul(4).ok_or(BlobError::ShapeOverflow)?;
    // guard absurd allocations before trusting the header
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() != want {
        return Err(BlobError::Length { got: bytes.len(), want });
    }
    let data = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    Ok((header, data))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_preserves_bits() {
        let header = TensorHeader::f32_row_major(vec![2, 3])
            .with_meta("stock", serde_json::json!("S0001"));
        let data = vec![1.0f32, -0.0, f32::MIN_POSITIVE, 3.5e-20, 1e20, 0.1];
        let mut buf = Vec::new();
        write_tensor(&mut buf, &header, &data).unwrap();
        let (h2, d2) = read_tensor(buf.as_slice()).unwrap();
        assert_eq!(h2.shape, vec![2, 3]);
        assert_eq!(h2.meta["stock"], serde_json::json!("S0001"));
        let bits: Vec<u32> = data.iter().map(|v| v.to_bits()).collect();
        let bits2: Vec<u32> = d2.iter().map(|v| v.to_bits()).collect();
        assert_eq!(bits, bits2);
    }

    #[test]
    fn truncated_blob_is_rejected() {
        let header = TensorHeader::f32_row_major(vec![4]);
        let mut buf = Vec::new();
        write_tensor(&mut buf, &header, &[1.0, 2.0, 3.0, 4.0]).unwrap();
        buf.truncate(buf.len() - 3);
        assert!(matches!(read_tensor(buf.as_slice()), Err(BlobError::Length { .. })));
    }

    #[test]
    fn overflowing_shape_is_rejected() {
        let line = format!(
            "{{\"shape\":[{},{}],\"dtype\":\"f32\",\"order\":\"row-major\",\"endian\":\"little\"}}\n",
            usize::MAX,
            2
        );
        assert!(matches!(
            read_tensor(line.as_bytes()),
            Err(BlobError::ShapeOverflow)
        ));
    }
}
