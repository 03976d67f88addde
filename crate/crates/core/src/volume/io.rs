//! Raw little-endian volumes with a JSON sidecar header.

use super::{VolumeError, VoxelVolume};
use crate::geometry::Point3;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VolumeHeader {
    pub dims: [u64; 3],
    pub voxel_size_nm: f64,
    pub element_bits: u32,
    #[serde(default)]
    pub origin_nm: [f64; 3],
}

impl VolumeHeader {
    /// Checks the geometry without touching any data.
    pub fn validate(&self) -> Result<(), VolumeError> {
        if self.dims.iter().any(|&d| d == 0) {
            return Err(VolumeError::InvalidDims(self.dims.map(|d| d as usize)));
        }
        if !(self.voxel_size_nm > 0.0 && self.voxel_size_nm.is_finite()) {
            return Err(VolumeError::InvalidVoxelSize(self.voxel_size_nm));
        }
        if !matches!(self.element_bits, 8 | 16 | 32) {
            return Err(VolumeError::InvalidElementBits(self.element_bits));
        }
        if self.expected_bytes().is_none() {
            return Err(VolumeError::Header("volume size overflows".into()));
        }
        Ok(())
    }

    pub fn voxel_count(&self) -> Option<u64> {
        self.dims[0].checked_mul(self.dims[1])?.checked_mul(self.dims[2])
    }

    pub fn expected_bytes(&self) -> Option<u64> {
        self.voxel_count()?.checked_mul(self.element_bits as u64 / 8)
    }
}

/// `<raw path>.json`
pub fn header_path_for(raw: &Path) -> PathBuf {
    let mut s = raw.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub fn read_header(path: &Path) -> Result<VolumeHeader, VolumeError> {
    let text = std::fs::read_to_string(path)?;
    let header: VolumeHeader =
        serde_json::from_str(&text).map_err(|e| VolumeError::Header(e.to_string()))?;
    header.validate()?;
    Ok(header)
}

pub fn load_volume(path: &Path, header: &VolumeHeader) -> Result<VoxelVolume, VolumeError> {
    header.validate()?;
    let expected = header.expected_bytes().unwrap_or(u64::MAX);
    let actual = std::fs::metadata(path)?.len();
    if actual != expected {
        return Err(VolumeError::SizeMismatch { expected, actual });
    }
    let bytes = std::fs::read(path)?;
    let data: Vec<u32> = match header.element_bits {
        8 => bytes.iter().map(|&b| b as u32).collect(),
        16 => bytes
            .chunks_exact(2)
            .map(|c| u16::from_le_bytes([c[0], c[1]]) as u32)
            .collect(),
        _ => bytes
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect(),
    };
    let dims = header.dims.map(|d| d as usize);
    let o = header.origin_nm;
    VoxelVolume::new(dims, header.voxel_size_nm, Point3::new(o[0], o[1], o[2]), data)
}

/// Writes the raw array and its sidecar header; returns the header.
pub fn write_volume(
    vol: &VoxelVolume,
    raw_path: &Path,
    element_bits: u32,
) -> Result<VolumeHeader, VolumeError> {
    let header = VolumeHeader {
        dims: vol.dims().map(|d| d as u64),
        voxel_size_nm: vol.voxel_size(),
        element_bits,
        origin_nm: [vol.origin().x, vol.origin().y, vol.origin().z],
    };
    header.validate()?;
    let max = match element_bits {
        8 => u8::MAX as u32,
        16 => u16::MAX as u32,
        _ => u32::MAX,
    };
    let mut bytes = Vec::with_capacity(vol.len() * element_bits as usize / 8);
    for &v in vol.data() {
        if v > max {
            return Err(VolumeError::ValueOverflow {
                value: v,
                bits: element_bits,
            });
        }
        match element_bits {
            8 => bytes.push(v as u8),
            16 => bytes.extend_from_slice(&(v as u16).to_le_bytes()),
            _ => bytes.extend_from_slice(&v.to_le_bytes()),
        }
    }
    std::fs::write(raw_path, bytes)?;
    let text = serde_json::to_string_pretty(&header).map_err(|e| VolumeError::Header(e.to_string()))?;
    std::fs::write(header_path_for(raw_path), text)?;
    Ok(header)
}
