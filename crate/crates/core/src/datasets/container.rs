//! Self-describing array container used for dataset caches and decomposition
//! dumps.
//!
//! Layout:
//!
//! ```text
//! RSLARR1 {"meta":{...},"arrays":[{"name":"inputs","shape":[n,d]},...]}\n
//! <little-endian f64 payload, arrays concatenated in header order, row-major>
//! ```
//!
//! The first line is UTF-8 and ends at the first `\n`. `meta` is a flat
//! string-to-string map (provenance). The payload length must equal the sum of
//! the products of the declared shapes, times 8.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub const CONTAINER_MAGIC: &str = "RSLARR1";

#[derive(Debug, thiserror::Error)]
pub enum ContainerError {
    #[error("missing or malformed header line")]
    BadHeader,
    #[error("header JSON: {0}")]
    HeaderJson(#[from] serde_json::Error),
    #[error("payload has {got} bytes, header declares {expected}")]
    PayloadLength { expected: usize, got: usize },
    #[error("array `{name}` has {got} values but shape {shape:?}")]
    ShapeMismatch {
        name: String,
        shape: Vec<usize>,
        got: usize,
    },
    #[error("no array named `{0}`")]
    MissingArray(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, PartialEq)]
pub struct NamedArray {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ArrayHeader {
    name: String,
    shape: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    meta: BTreeMap<String, String>,
    arrays: Vec<ArrayHeader>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ArrayContainer {
    pub meta: BTreeMap<String, String>,
    pub arrays: Vec<NamedArray>,
}

impl ArrayContainer {
    pub fn push(
        &mut self,
        name: impl Into<String>,
        shape: Vec<usize>,
        data: Vec<f64>,
    ) -> Result<(), ContainerError> {
        let name = name.into();
        if shape.iter().product::<usize>() != data.len() {
            return Err(ContainerError::ShapeMismatch {
                name,
                shape,
                got: data.len(),
            });
        }
        self.arrays.push(NamedArray { name, shape, data });
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<&NamedArray, ContainerError> {
        self.arrays
            .iter()
            .find(|a| a.name == name)
            .ok_or_else(|| ContainerError::MissingArray(name.to_string()))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = Header {
            meta: self.meta.clone(),
            arrays: self
                .arrays
                .iter()
                .map(|a| ArrayHeader {
                    name: a.name.clone(),
                    shape: a.shape.clone(),
                })
                .collect(),
        };
        let json = serde_json::to_string(&header).expect("header serializes");
        let mut out = format!("{CONTAINER_MAGIC} {json}\n").into_bytes();
        for a in &self.arrays {
            for v in &a.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ContainerError> {
        let nl = bytes
            .iter()
            .position(|&b| b == b'\n')
            .ok_or(ContainerError::BadHeader)?;
        let line = std::str::from_utf8(&bytes[..nl]).map_err(|_| ContainerError::BadHeader)?;
        let json = line
            .strip_prefix(CONTAINER_MAGIC)
            .and_then(|s| s.strip_prefix(' '))
            .ok_or(ContainerError::BadHeader)?;
        let header: Header = serde_json::from_str(json)?;
        let payload = &bytes[nl + 1..];
        let expected: usize = header
            .arrays
            .iter()
            .map(|a| a.shape.iter().product::<usize>() * 8)
            .sum();
        if payload.len() != expected {
            return Err(ContainerError::PayloadLength {
                expected,
                got: payload.len(),
            });
        }
        let mut values = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")));
        let arrays = header
            .arrays
            .into_iter()
            .map(|h| {
                let n = h.shape.iter().product();
                NamedArray {
                    name: h.name,
                    shape: h.shape,
                    data: values.by_ref().take(n).collect(),
                }
            })
            .collect();
        Ok(Self {
            meta: header.meta,
            arrays,
        })
    }

    pub fn write(&self, path: &Path) -> Result<(), ContainerError> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self, ContainerError> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}
