//! Binary parameter checkpoints.
//!
//! Layout, all little-endian:
//!
//! | bytes | field |
//! |-------|-------|
//! | 4     | magic `ARLC` |
//! | 4     | format version (`u32`) |
//! | 8     | network hash (`u64`) |
//! | 8     | `theta` count (`u64`) |
//! | 8     | `theta_v` count (`u64`) |
//! | 4 n   | `theta` as `f32` |
//! | 4 m   | `theta_v` as `f32` |

use std::fs;
use std::path::Path;

use asyncrl_core::nn::Architecture;

use crate::error::CheckpointError;

pub const MAGIC: [u8; 4] = *b"ARLC";
pub const FORMAT_VERSION: u32 = 1;
pub const HEADER_LEN: usize = 32;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub spec_hash: u64,
    pub theta: Vec<f32>,
    pub theta_v: Vec<f32>,
}

impl Checkpoint {
    pub fn new(arch: &Architecture, theta: Vec<f32>, theta_v: Vec<f32>) -> Self {
        Self {
            spec_hash: arch.fingerprint(),
            theta,
            theta_v,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + 4 * (self.theta.len() + self.theta_v.len()));
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&self.spec_hash.to_le_bytes());
        out.extend_from_slice(&(self.theta.len() as u64).to_le_bytes());
        out.extend_from_slice(&(self.theta_v.len() as u64).to_le_bytes());
        for x in self.theta.iter().chain(&self.theta_v) {
            out.extend_from_slice(&x.to_le_bytes());
        }
        out
    }

    /// Parses a checkpoint, checking it against `arch` when given.
    pub fn from_bytes(bytes: &[u8], arch: Option<&Architecture>) -> Result<Self, CheckpointError> {
        if bytes.len() < 4 || bytes[..4] != MAGIC {
            return Err(CheckpointError::BadMagic);
        }
        if bytes.len() < HEADER_LEN {
            return Err(CheckpointError::Truncated {
                needed: HEADER_LEN as u64,
                actual: bytes.len() as u64,
            });
        }
        let u32_at = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
        let u64_at = |i: usize| u64::from_le_bytes(bytes[i..i + 8].try_into().unwrap());
        let version = u32_at(4);
        if version != FORMAT_VERSION {
            return Err(CheckpointError::Version(version));
        }
        let spec_hash = u64_at(8);
        let (n, m) = (u64_at(16), u64_at(24));
        if let Some(arch) = arch {
            if spec_hash != arch.fingerprint() {
                return Err(CheckpointError::HashMismatch {
                    expected: arch.fingerprint(),
                    found: spec_hash,
                });
            }
            let want = (arch.theta_len() as u64, arch.theta_v_len() as u64);
            if (n, m) != want {
                return Err(CheckpointError::CountMismatch {
                    expected: want.0 + want.1,
                    found: n.saturating_add(m),
                });
            }
        }
        let needed = n
            .checked_add(m)
            .and_then(|c| c.checked_mul(4))
            .and_then(|b| b.checked_add(HEADER_LEN as u64))
            .unwrap_or(u64::MAX);
        let actual = bytes.len() as u64;
        if actual < needed {
            return Err(CheckpointError::Truncated { needed, actual });
        }
        if actual > needed {
            return Err(CheckpointError::TrailingBytes(actual - needed));
        }
        let mut floats = bytes[HEADER_LEN..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()));
        let theta = floats.by_ref().take(n as usize).collect();
        let theta_v = floats.collect();
        Ok(Self {
            spec_hash,
            theta,
            theta_v,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        // write beside the target then rename, so readers never see half a file
        let tmp = path.with_extension("ckpt.tmp");
        let io = |source| CheckpointError::Io {
            path: path.to_path_buf(),
            source,
        };
        fs::write(&tmp, self.to_bytes()).map_err(io)?;
        fs::rename(&tmp, path).map_err(io)
    }

    pub fn load(path: &Path, arch: Option<&Architecture>) -> Result<Self, CheckpointError> {
        let bytes = fs::read(path).map_err(|source| CheckpointError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_bytes(&bytes, arch)
    }
}
