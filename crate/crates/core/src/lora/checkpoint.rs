//! Adapter checkpoints.
//!
//! Binary layout, all integers and floats little-endian:
//!
//! | offset | size      | field                 |
//! |--------|-----------|-----------------------|
//! | 0      | 8         | magic `VPLORA01`      |
//! | 8      | 4         | `d` (u32)             |
//! | 12     | 4         | `k` (u32)             |
//! | 16     | 4         | `r` (u32)             |
//! | 20     | 8         | `alpha` (f64)         |
//! | 28     | 8·d·r     | `A`, row-major f64    |
//! | 28+8dr | 8·k·r     | `B`, row-major f64    |

use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{AdapterPair, LoraError, Matrix};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"VPLORA01";
const HEADER: usize = 28;

/// Serde form of an adapter, for JSON checkpoints.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdapterCheckpoint {
    pub d: usize,
    pub k: usize,
    pub r: usize,
    pub alpha: f64,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl From<&AdapterPair> for AdapterCheckpoint {
    fn from(p: &AdapterPair) -> Self {
        AdapterCheckpoint {
            d: p.a.rows(),
            k: p.b.rows(),
            r: p.rank(),
            alpha: p.alpha,
            a: p.a.as_slice().to_vec(),
            b: p.b.as_slice().to_vec(),
        }
    }
}

impl TryFrom<AdapterCheckpoint> for AdapterPair {
    type Error = LoraError;

    fn try_from(c: AdapterCheckpoint) -> Result<Self, LoraError> {
        AdapterPair::new(Matrix::from_vec(c.d, c.r, c.a)?, Matrix::from_vec(c.k, c.r, c.b)?, c.alpha)
    }
}

pub fn encode_checkpoint(p: &AdapterPair) -> Vec<u8> {
    let (d, k, r) = (p.a.rows(), p.b.rows(), p.rank());
    let mut out = Vec::with_capacity(HEADER + 8 * r * (d + k));
    out.extend_from_slice(CHECKPOINT_MAGIC);
    for n in [d, k, r] {
        out.extend_from_slice(&(n as u32).to_le_bytes());
    }
    out.extend_from_slice(&p.alpha.to_le_bytes());
    for x in p.a.as_slice().iter().chain(p.b.as_slice()) {
        out.extend_from_slice(&x.to_le_bytes());
    }
    out
}

fn u32_at(bytes: &[u8], at: usize) -> usize {
    u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes")) as usize
}

fn f64_at(bytes: &[u8], at: usize) -> f64 {
    f64::from_le_bytes(bytes[at..at + 8].try_into().expect("8 bytes"))
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<AdapterPair, LoraError> {
    if bytes.len() < HEADER {
        return Err(LoraError::Checkpoint(format!("{} bytes is shorter than the header", bytes.len())));
    }
    if &bytes[..8] != CHECKPOINT_MAGIC {
        return Err(LoraError::Checkpoint("bad magic".into()));
    }
    let (d, k, r) = (u32_at(bytes, 8), u32_at(bytes, 12), u32_at(bytes, 16));
    let alpha = f64_at(bytes, 20);
    let want = (d + k)
        .checked_mul(r)
        .and_then(|n| n.checked_mul(8))
        .and_then(|n| n.checked_add(HEADER));
    if want != Some(bytes.len()) {
        return Err(LoraError::Checkpoint(format!(
            "length {} does not match d={d} k={k} r={r}",
            bytes.len()
        )));
    }
    let floats: Vec<f64> = (0..r * (d + k)).map(|i| f64_at(bytes, HEADER + 8 * i)).collect();
    let (a, b) = floats.split_at(d * r);
    AdapterPair::new(Matrix::from_vec(d, r, a.to_vec())?, Matrix::from_vec(k, r, b.to_vec())?, alpha)
}
