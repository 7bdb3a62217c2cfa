//! IDX container (the MNIST distribution format).
//!
//! A file starts with a big-endian `u32` magic `0x000008NN`, where `NN` is the
//! number of dimensions, followed by `NN` big-endian `u32` sizes and the
//! unsigned-byte payload. Only the unsigned-byte element type (`0x08`) is
//! supported; MNIST images use `0x00000803` and labels `0x00000801`.

use crate::datasets::DataError;

const UBYTE_TYPE: u8 = 0x08;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IdxArray {
    pub dims: Vec<usize>,
    pub data: Vec<u8>,
}

impl IdxArray {
    pub fn new(dims: Vec<usize>, data: Vec<u8>) -> Result<Self, DataError> {
        let expected = checked_product(&dims).ok_or(DataError::IdxDimensionOverflow)?;
        if expected != data.len() {
            return Err(DataError::IdxTruncated {
                expected,
                got: data.len(),
            });
        }
        Ok(Self { dims, data })
    }

    /// Number of items along the first axis.
    pub fn count(&self) -> usize {
        self.dims.first().copied().unwrap_or(0)
    }

    /// Bytes of item `i` along the first axis.
    pub fn item(&self, i: usize) -> &[u8] {
        let stride: usize = self.dims[1..].iter().product();
        &self.data[i * stride..(i + 1) * stride]
    }
}

fn checked_product(dims: &[usize]) -> Option<usize> {
    dims.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d))
}

fn read_u32_be(bytes: &[u8], at: usize) -> Option<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes(b.try_into().expect("4 bytes")))
}

pub fn load_idx(bytes: &[u8]) -> Result<IdxArray, DataError> {
    let magic = read_u32_be(bytes, 0).ok_or(DataError::IdxTruncated {
        expected: 4,
        got: bytes.len(),
    })?;
    let [z0, z1, ty, ndim] = magic.to_be_bytes();
    if z0 != 0 || z1 != 0 || ty != UBYTE_TYPE || ndim == 0 {
        return Err(DataError::IdxBadMagic(magic));
    }
    let ndim = ndim as usize;
    let header = 4 + 4 * ndim;
    let mut dims = Vec::with_capacity(ndim);
    for i in 0..ndim {
        let d = read_u32_be(bytes, 4 + 4 * i).ok_or(DataError::IdxTruncated {
            expected: header,
            got: bytes.len(),
        })?;
        dims.push(usize::try_from(d).map_err(|_| DataError::IdxDimensionOverflow)?);
    }
    let expected = checked_product(&dims).ok_or(DataError::IdxDimensionOverflow)?;
    let payload = &bytes[header..];
    if payload.len() < expected {
        return Err(DataError::IdxTruncated {
            expected,
            got: payload.len(),
        });
    }
    if payload.len() > expected {
        return Err(DataError::IdxTrailingBytes {
            extra: payload.len() - expected,
        });
    }
    Ok(IdxArray {
        dims,
        data: payload.to_vec(),
    })
}

pub fn serialize_idx(array: &IdxArray) -> Result<Vec<u8>, DataError> {
    let ndim = u8::try_from(array.dims.len()).map_err(|_| DataError::IdxDimensionOverflow)?;
    let mut out = Vec::with_capacity(4 + 4 * array.dims.len() + array.data.len());
    out.extend_from_slice(&[0, 0, UBYTE_TYPE, ndim]);
    for &d in &array.dims {
        let d = u32::try_from(d).map_err(|_| DataError::IdxDimensionOverflow)?;
        out.extend_from_slice(&d.to_be_bytes());
    }
    out.extend_from_slice(&array.data);
    Ok(out)
}
