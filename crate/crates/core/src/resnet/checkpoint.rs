//! Binary checkpoint format.
//!
//! ```text
//! "RSLB" | version: u32 LE | header_len: u32 LE | header (UTF-8, header_len bytes)
//!        | payload: f64 LE ... | checksum: u64 LE
//! ```
//!
//! The header is `key=value` lines: `L`, `d`, `activation`, `delta_mode`,
//! `seed`, `loss_final`, `converged`. The payload is `A_0..A_{L-1}` (each
//! row-major `d x d`), `b_0..b_{L-1}`, then δ (one value when shared, `L`
//! otherwise). The checksum is 64-bit FNV-1a over the payload bytes.

use std::collections::BTreeMap;
use std::path::Path;

use crate::numerics::tensor::{Mat, Vector};
use crate::resnet::arch::{Activation, Architecture, DeltaMode};
use crate::resnet::network::{Delta, ResNet};
use crate::scalar::Scalar;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"RSLB";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("not a version-{CHECKPOINT_VERSION} checkpoint (magic {magic:?}, version {version})")]
    VersionMismatch { magic: [u8; 4], version: u32 },
    #[error("checksum mismatch: stored {stored:#018x}, computed {computed:#018x}")]
    ChecksumMismatch { stored: u64, computed: u64 },
    #[error("truncated checkpoint: needed {needed} bytes, have {have}")]
    Truncated { needed: usize, have: usize },
    #[error("malformed header: {0}")]
    BadHeader(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A network plus the run metadata stored with it.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint<T> {
    pub net: ResNet<T>,
    pub seed: u64,
    pub loss_final: Option<f64>,
    pub converged: bool,
}

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

impl<T: Scalar> Checkpoint<T> {
    pub fn new(net: ResNet<T>, seed: u64) -> Self {
        Self {
            net,
            seed,
            loss_final: None,
            converged: false,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let arch = &self.net.arch;
        let loss = self
            .loss_final
            .map_or_else(|| "none".to_string(), |l| format!("{l:e}"));
        let header = format!(
            "L={}\nd={}\nactivation={}\ndelta_mode={}\nseed={}\nloss_final={}\nconverged={}\n",
            arch.depth,
            arch.width,
            arch.activation,
            arch.delta_mode,
            self.seed,
            loss,
            self.converged
        );
        let payload: Vec<u8> = self
            .net
            .to_flat()
            .iter()
            .flat_map(|v| v.as_f64().to_le_bytes())
            .collect();
        let mut out = Vec::with_capacity(12 + header.len() + payload.len() + 8);
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(header.as_bytes());
        out.extend_from_slice(&payload);
        out.extend_from_slice(&fnv1a64(&payload).to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CheckpointError> {
        let need = |n: usize| {
            if bytes.len() < n {
                Err(CheckpointError::Truncated {
                    needed: n,
                    have: bytes.len(),
                })
            } else {
                Ok(())
            }
        };
        need(12)?;
        let magic: [u8; 4] = bytes[0..4].try_into().expect("4 bytes");
        let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
        if &magic != CHECKPOINT_MAGIC || version != CHECKPOINT_VERSION {
            return Err(CheckpointError::VersionMismatch { magic, version });
        }
        let header_len = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
        need(12 + header_len)?;
        let header = std::str::from_utf8(&bytes[12..12 + header_len])
            .map_err(|e| CheckpointError::BadHeader(e.to_string()))?;
        let fields = parse_header(header)?;
        let get = |k: &str| {
            fields
                .get(k)
                .ok_or_else(|| CheckpointError::BadHeader(format!("missing `{k}`")))
        };
        let parse_num = |k: &str| -> Result<u64, CheckpointError> {
            get(k)?
                .parse()
                .map_err(|_| CheckpointError::BadHeader(format!("bad `{k}`")))
        };
        let depth = parse_num("L")? as usize;
        let width = parse_num("d")? as usize;
        let seed = parse_num("seed")?;
        let activation: Activation = get("activation")?
            .parse()
            .map_err(CheckpointError::BadHeader)?;
        let delta_mode: DeltaMode = get("delta_mode")?
            .parse()
            .map_err(CheckpointError::BadHeader)?;
        let loss_final = match get("loss_final")?.as_str() {
            "none" => None,
            s => Some(
                s.parse()
                    .map_err(|_| CheckpointError::BadHeader("bad `loss_final`".into()))?,
            ),
        };
        let converged = match get("converged")?.as_str() {
            "true" => true,
            "false" => false,
            _ => return Err(CheckpointError::BadHeader("bad `converged`".into())),
        };
        let arch = Architecture::new(depth, width, activation, delta_mode)
            .map_err(|e| CheckpointError::BadHeader(e.to_string()))?;

        let start = 12 + header_len;
        let n_params = arch.param_count();
        let end = start + 8 * n_params;
        need(end + 8)?;
        let payload = &bytes[start..end];
        let stored = u64::from_le_bytes(bytes[end..end + 8].try_into().expect("8 bytes"));
        let computed = fnv1a64(payload);
        if stored != computed {
            return Err(CheckpointError::ChecksumMismatch { stored, computed });
        }
        if bytes.len() != end + 8 {
            return Err(CheckpointError::BadHeader(format!(
                "{} bytes after checksum",
                bytes.len() - end - 8
            )));
        }
        let flat: Vec<T> = payload
            .chunks_exact(8)
            .map(|c| T::lit(f64::from_le_bytes(c.try_into().expect("8 bytes"))))
            .collect();
        let (d, l) = (width, depth);
        let a = (0..l).map(|_| Mat::zeros(d, d)).collect();
        let b = (0..l).map(|_| Vector::zeros(d)).collect();
        let delta = match delta_mode {
            DeltaMode::Shared => Delta::Shared(T::zero()),
            DeltaMode::PerLayer => Delta::PerLayer(vec![T::zero(); l]),
        };
        let mut net = ResNet { arch, a, b, delta };
        net.set_flat(&flat)
            .map_err(|e| CheckpointError::BadHeader(e.to_string()))?;
        Ok(Self {
            net,
            seed,
            loss_final,
            converged,
        })
    }
}

fn parse_header(text: &str) -> Result<BTreeMap<String, String>, CheckpointError> {
    text.lines()
        .filter(|l| !l.is_empty())
        .map(|l| {
            l.split_once('=')
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .ok_or_else(|| CheckpointError::BadHeader(format!("line `{l}`")))
        })
        .collect()
}

pub fn save_checkpoint<T: Scalar>(
    ckpt: &Checkpoint<T>,
    path: &Path,
) -> Result<(), CheckpointError> {
    std::fs::write(path, ckpt.to_bytes())?;
    Ok(())
}

pub fn load_checkpoint<T: Scalar>(path: &Path) -> Result<Checkpoint<T>, CheckpointError> {
    Checkpoint::from_bytes(&std::fs::read(path)?)
}
