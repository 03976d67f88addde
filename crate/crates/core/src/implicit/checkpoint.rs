//! Checkpoint layout, little endian:
//!
//! ```text
//! magic "MFMP" | version u16 | activation u8 | reserved u8
//! | input dim u32 (always 3) | width u32 | blocks u32 | seed u64
//! | parameter count u64 | parameters f64...
//! | SHA-256 of everything above (32 bytes)
//! ```

use super::{parameter_count, Activation, FitError, MlpOccupancy};
use sha2::{Digest, Sha256};
use std::path::Path;

const MAGIC: &[u8; 4] = b"MFMP";
const VERSION: u16 = 1;
const HEADER: usize = 4 + 2 + 1 + 1 + 4 + 4 + 4 + 8 + 8;

pub fn to_bytes(model: &MlpOccupancy) -> Vec<u8> {
    let mut b = Vec::with_capacity(HEADER + 8 * model.params.len() + 32);
    b.extend_from_slice(MAGIC);
    b.extend_from_slice(&VERSION.to_le_bytes());
    b.push(model.activation.code());
    b.push(0);
    b.extend_from_slice(&3u32.to_le_bytes());
    b.extend_from_slice(&(model.width as u32).to_le_bytes());
    b.extend_from_slice(&(model.blocks as u32).to_le_bytes());
    b.extend_from_slice(&model.seed.to_le_bytes());
    b.extend_from_slice(&(model.params.len() as u64).to_le_bytes());
    for p in &model.params {
        b.extend_from_slice(&p.to_le_bytes());
    }
    let digest = Sha256::digest(&b);
    b.extend_from_slice(&digest);
    b
}

pub fn from_bytes(bytes: &[u8]) -> Result<MlpOccupancy, FitError> {
    let bad = |m: String| FitError::Malformed(m);
    if bytes.len() < HEADER + 32 {
        return Err(bad("truncated header".into()));
    }
    if &bytes[..4] != MAGIC {
        return Err(bad("bad magic".into()));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let activation = Activation::from_code(bytes[6]).ok_or_else(|| bad(format!("unknown activation {}", bytes[6])))?;
    if u32_at(8) != 3 {
        return Err(bad(format!("input dimension {} is not 3", u32_at(8))));
    }
    let (width, blocks) = (u32_at(12) as usize, u32_at(16) as usize);
    let seed = u64_at(20);
    let count = u64_at(28) as usize;
    let body = count.checked_mul(8).and_then(|c| c.checked_add(HEADER)).ok_or_else(|| bad("count overflows".into()))?;
    if bytes.len() != body + 32 {
        return Err(bad("length does not match header".into()));
    }
    if Sha256::digest(&bytes[..body]).as_slice() != &bytes[body..] {
        return Err(FitError::ChecksumMismatch);
    }
    if count != parameter_count(width, blocks) {
        return Err(FitError::ParameterCount { expected: parameter_count(width, blocks), actual: count });
    }
    let params = bytes[HEADER..body].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    MlpOccupancy::from_params(width, blocks, activation, params, seed)
}

pub fn write_checkpoint(model: &MlpOccupancy, path: &Path) -> Result<(), FitError> {
    std::fs::write(path, to_bytes(model))?;
    Ok(())
}

pub fn read_checkpoint(path: &Path) -> Result<MlpOccupancy, FitError> {
    from_bytes(&std::fs::read(path)?)
}
