//! The IMTF tensor container.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic   "IMTF"            4 bytes
//! version u16 = 1           2 bytes
//! dtype   u8  (1=f32, 2=u8) 1 byte
//! ndim    u8                1 byte
//! dims    u32 × ndim
//! payload row-major, last dimension fastest
//! ```
//!
//! The encoding is canonical: there is no padding and no optional field, so
//! equal tensors always encode to equal bytes.

use std::fs;
use std::path::Path;

use crate::{Error, Result};

pub const MAGIC: [u8; 4] = *b"IMTF";
pub const VERSION: u16 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum DType {
    F32 = 1,
    U8 = 2,
}

impl DType {
    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Result<Self> {
        match code {
            1 => Ok(DType::F32),
            2 => Ok(DType::U8),
            other => Err(Error::UnsupportedDtype(other)),
        }
    }

    pub fn size(self) -> usize {
        match self {
            DType::F32 => 4,
            DType::U8 => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TensorData {
    F32(Vec<f32>),
    U8(Vec<u8>),
}

impl TensorData {
    pub fn dtype(&self) -> DType {
        match self {
            TensorData::F32(_) => DType::F32,
            TensorData::U8(_) => DType::U8,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            TensorData::F32(v) => v.len(),
            TensorData::U8(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A decoded tensor: dimensions plus a typed, row-major payload.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub dims: Vec<usize>,
    pub data: TensorData,
}

impl Tensor {
    pub fn new(dims: Vec<usize>, data: TensorData) -> Result<Self> {
        check_shape(&dims, data.len())?;
        Ok(Tensor { dims, data })
    }

    pub fn dtype(&self) -> DType {
        self.data.dtype()
    }

    pub fn into_f32(self) -> Result<(Vec<usize>, Vec<f32>)> {
        match self.data {
            TensorData::F32(v) => Ok((self.dims, v)),
            TensorData::U8(_) => Err(Error::shape(
                "expected a dtype-1 (f32) tensor, found dtype 2",
            )),
        }
    }

    pub fn into_u8(self) -> Result<(Vec<usize>, Vec<u8>)> {
        match self.data {
            TensorData::U8(v) => Ok((self.dims, v)),
            TensorData::F32(_) => Err(Error::shape(
                "expected a dtype-2 (u8) tensor, found dtype 1",
            )),
        }
    }
}

fn check_shape(dims: &[usize], len: usize) -> Result<usize> {
    if dims.len() > u8::MAX as usize {
        return Err(Error::shape(format!(
            "{} dimensions exceed the 255 limit",
            dims.len()
        )));
    }
    if let Some(d) = dims.iter().find(|&&d| d > u32::MAX as usize) {
        return Err(Error::shape(format!(
            "dimension {d} does not fit in 32 bits"
        )));
    }
    let count = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::shape("element count overflows"))?;
    if count != len {
        return Err(Error::shape(format!(
            "dims {dims:?} require {count} elements, payload has {len}"
        )));
    }
    Ok(count)
}

/// Serializes a tensor into its canonical byte form.
pub fn encode(dims: &[usize], data: &TensorData) -> Result<Vec<u8>> {
    let count = check_shape(dims, data.len())?;
    let dtype = data.dtype();
    let mut out = Vec::with_capacity(8 + 4 * dims.len() + count * dtype.size());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(dtype.code());
    out.push(dims.len() as u8);
    for &d in dims {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    match data {
        TensorData::F32(values) => {
            for v in values {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        TensorData::U8(values) => out.extend_from_slice(values),
    }
    Ok(out)
}

/// Parses the canonical byte form produced by [`encode`].
pub fn decode(bytes: &[u8]) -> Result<Tensor> {
    let header = |need: usize| -> Result<()> {
        if bytes.len() < need {
            Err(Error::Truncated {
                expected: need,
                found: bytes.len(),
            })
        } else {
            Ok(())
        }
    };
    header(4)?;
    let magic: [u8; 4] = bytes[0..4].try_into().unwrap();
    if magic != MAGIC {
        return Err(Error::BadMagic(magic));
    }
    header(8)?;
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let dtype = DType::from_code(bytes[6])?;
    let ndim = bytes[7] as usize;
    let payload_start = 8 + 4 * ndim;
    header(payload_start)?;
    let dims: Vec<usize> = bytes[8..payload_start]
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes(c.try_into().unwrap()) as usize)
        .collect();
    let count = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::shape("element count overflows"))?;
    let payload_len = count
        .checked_mul(dtype.size())
        .ok_or_else(|| Error::shape("payload size overflows"))?;
    let payload = &bytes[payload_start..];
    if payload.len() < payload_len {
        return Err(Error::Truncated {
            expected: payload_len,
            found: payload.len(),
        });
    }
    if payload.len() > payload_len {
        return Err(Error::TrailingBytes(payload.len() - payload_len));
    }
    let data = match dtype {
        DType::F32 => TensorData::F32(
            payload
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect(),
        ),
        DType::U8 => TensorData::U8(payload.to_vec()),
    };
    Ok(Tensor { dims, data })
}

pub fn write_tensor(path: impl AsRef<Path>, dims: &[usize], data: &TensorData) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode(dims, data)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_tensor(path: impl AsRef<Path>) -> Result<Tensor> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}
