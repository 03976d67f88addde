//! Segmented 3D volumes: loading, resampling and instance decomposition.

mod components;
mod io;

pub use components::{
    connected_components, extract_instance, filter_small_components, Connectivity, InstanceIndex,
    DEFAULT_MIN_VOXELS,
};
pub use io::{header_path_for, load_volume, read_header, write_volume, VolumeHeader};

use crate::geometry::Point3;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum VolumeError {
    #[error("volume file holds {actual} bytes but the header implies {expected}")]
    SizeMismatch { expected: u64, actual: u64 },
    #[error("voxel size must be positive and finite, got {0}")]
    InvalidVoxelSize(f64),
    #[error("dimensions must all be >= 1, got {0:?}")]
    InvalidDims([usize; 3]),
    #[error("data holds {actual} values but dims imply {expected}")]
    DataLength { expected: usize, actual: usize },
    #[error("element width must be 8, 16 or 32 bits, got {0}")]
    InvalidElementBits(u32),
    #[error("downsample factor must be >= 1, got {0}")]
    InvalidFactor(usize),
    #[error("volume is not binary (found value {0})")]
    NonBinary(u32),
    #[error("instance {0} does not exist in the labeling")]
    UnknownInstance(u32),
    #[error("connectivity must be 6, 18 or 26, got {0}")]
    InvalidConnectivity(u32),
    #[error("value {value} does not fit in {bits}-bit elements")]
    ValueOverflow { value: u32, bits: u32 },
    #[error("malformed header: {0}")]
    Header(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Isotropic 3D raster. Index order is x fastest, then y, then z.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelVolume {
    dims: [usize; 3],
    voxel_size: f64,
    origin: Point3,
    data: Vec<u32>,
}

impl VoxelVolume {
    pub fn new(
        dims: [usize; 3],
        voxel_size: f64,
        origin: Point3,
        data: Vec<u32>,
    ) -> Result<Self, VolumeError> {
        if dims.iter().any(|&d| d == 0) {
            return Err(VolumeError::InvalidDims(dims));
        }
        if !(voxel_size > 0.0 && voxel_size.is_finite()) {
            return Err(VolumeError::InvalidVoxelSize(voxel_size));
        }
        let expected = dims[0] * dims[1] * dims[2];
        if data.len() != expected {
            return Err(VolumeError::DataLength {
                expected,
                actual: data.len(),
            });
        }
        Ok(Self {
            dims,
            voxel_size,
            origin,
            data,
        })
    }

    pub fn zeros(dims: [usize; 3], voxel_size: f64, origin: Point3) -> Result<Self, VolumeError> {
        let n = dims.iter().product();
        Self::new(dims, voxel_size, origin, vec![0; n])
    }

    /// Binary mask from a predicate on voxel indices.
    pub fn from_fn(
        dims: [usize; 3],
        voxel_size: f64,
        origin: Point3,
        mut f: impl FnMut(usize, usize, usize) -> bool,
    ) -> Result<Self, VolumeError> {
        let mut data = Vec::with_capacity(dims.iter().product());
        for z in 0..dims[2] {
            for y in 0..dims[1] {
                for x in 0..dims[0] {
                    data.push(f(x, y, z) as u32);
                }
            }
        }
        Self::new(dims, voxel_size, origin, data)
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn voxel_size(&self) -> f64 {
        self.voxel_size
    }

    pub fn origin(&self) -> Point3 {
        self.origin
    }

    pub fn data(&self) -> &[u32] {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.dims[0] * (y + self.dims[1] * z)
    }

    #[inline]
    pub fn coords(&self, index: usize) -> [usize; 3] {
        let x = index % self.dims[0];
        let yz = index / self.dims[0];
        [x, yz % self.dims[1], yz / self.dims[1]]
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> u32 {
        self.data[self.index(x, y, z)]
    }

    pub fn set(&mut self, x: usize, y: usize, z: usize, value: u32) {
        let i = self.index(x, y, z);
        self.data[i] = value;
    }

    /// Physical position of a voxel center: `origin + index * voxel_size`.
    pub fn position(&self, x: usize, y: usize, z: usize) -> Point3 {
        self.origin + nalgebra::Vector3::new(x as f64, y as f64, z as f64) * self.voxel_size
    }

    pub fn is_binary(&self) -> bool {
        self.data.iter().all(|&v| v <= 1)
    }

    pub fn ensure_binary(&self) -> Result<(), VolumeError> {
        match self.data.iter().find(|&&v| v > 1) {
            Some(&v) => Err(VolumeError::NonBinary(v)),
            None => Ok(()),
        }
    }

    pub fn foreground_count(&self) -> usize {
        self.data.iter().filter(|&&v| v != 0).count()
    }

    /// Value lookup at a physical position (nearest voxel center); 0 outside.
    pub fn sample_nearest(&self, p: &Point3) -> u32 {
        let mut idx = [0usize; 3];
        for a in 0..3 {
            let f = ((p[a] - self.origin[a]) / self.voxel_size).round();
            if f < 0.0 || f >= self.dims[a] as f64 {
                return 0;
            }
            idx[a] = f as usize;
        }
        self.get(idx[0], idx[1], idx[2])
    }

    /// Binary copy surrounded by `pad` background voxels on every side, with
    /// the origin shifted so physical positions are unchanged.
    pub fn padded(&self, pad: usize) -> VoxelVolume {
        let d = self.dims;
        let nd = [d[0] + 2 * pad, d[1] + 2 * pad, d[2] + 2 * pad];
        let mut data = vec![0u32; nd[0] * nd[1] * nd[2]];
        for z in 0..d[2] {
            for y in 0..d[1] {
                let src = self.index(0, y, z);
                let dst = pad + nd[0] * (y + pad + nd[1] * (z + pad));
                data[dst..dst + d[0]].copy_from_slice(&self.data[src..src + d[0]]);
            }
        }
        let shift = self.voxel_size * pad as f64;
        VoxelVolume {
            dims: nd,
            voxel_size: self.voxel_size,
            origin: self.origin - nalgebra::Vector3::repeat(shift),
            data,
        }
    }
}

/// Block-downsamples by an integer factor.
///
/// A coarse voxel is foreground when at least half of the fine voxels it
/// covers are foreground (ties go to foreground). In a label volume the
/// foreground value is the most frequent nonzero label of the block, the
/// smaller label winning ties. Partial blocks at the far edges count only
/// the voxels that exist.
pub fn downsample(vol: &VoxelVolume, factor: usize) -> Result<VoxelVolume, VolumeError> {
    if factor < 1 {
        return Err(VolumeError::InvalidFactor(factor));
    }
    if factor == 1 {
        return Ok(vol.clone());
    }
    let d = vol.dims;
    let nd = [
        d[0].div_ceil(factor),
        d[1].div_ceil(factor),
        d[2].div_ceil(factor),
    ];
    let binary = vol.is_binary();
    let mut data = Vec::with_capacity(nd[0] * nd[1] * nd[2]);
    let mut counts: Vec<(u32, usize)> = Vec::new();
    for bz in 0..nd[2] {
        for by in 0..nd[1] {
            for bx in 0..nd[0] {
                let (x0, y0, z0) = (bx * factor, by * factor, bz * factor);
                let (x1, y1, z1) = (
                    (x0 + factor).min(d[0]),
                    (y0 + factor).min(d[1]),
                    (z0 + factor).min(d[2]),
                );
                let covered = (x1 - x0) * (y1 - y0) * (z1 - z0);
                let mut fg = 0usize;
                counts.clear();
                for z in z0..z1 {
                    for y in y0..y1 {
                        for x in x0..x1 {
                            let v = vol.get(x, y, z);
                            if v != 0 {
                                fg += 1;
                                if !binary {
                                    match counts.iter_mut().find(|(l, _)| *l == v) {
                                        Some(c) => c.1 += 1,
                                        None => counts.push((v, 1)),
                                    }
                                }
                            }
                        }
                    }
                }
                let value = if 2 * fg >= covered && fg > 0 {
                    if binary {
                        1
                    } else {
                        counts
                            .iter()
                            .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
                            .map(|c| c.0)
                            .unwrap_or(1)
                    }
                } else {
                    0
                };
                data.push(value);
            }
        }
    }
    VoxelVolume::new(nd, vol.voxel_size * factor as f64, vol.origin, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cube(n: usize, vs: f64, fill: impl Fn(usize, usize, usize) -> bool) -> VoxelVolume {
        VoxelVolume::from_fn([n, n, n], vs, Point3::origin(), fill).unwrap()
    }

    #[test]
    fn invariants_enforced() {
        assert!(matches!(
            VoxelVolume::new([0, 1, 1], 1.0, Point3::origin(), vec![]),
            Err(VolumeError::InvalidDims(_))
        ));
        assert!(matches!(
            VoxelVolume::new([1, 1, 1], 0.0, Point3::origin(), vec![0]),
            Err(VolumeError::InvalidVoxelSize(_))
        ));
        assert!(matches!(
            VoxelVolume::new([2, 1, 1], 1.0, Point3::origin(), vec![0]),
            Err(VolumeError::DataLength { .. })
        ));
    }

    #[test]
    fn downsample_factor_one_is_identity() {
        let v = cube(4, 8.0, |x, y, z| (x + y + z) % 3 == 0);
        assert_eq!(downsample(&v, 1).unwrap(), v);
        assert!(matches!(downsample(&v, 0), Err(VolumeError::InvalidFactor(0))));
    }

    #[test]
    fn downsample_full_block_8_to_24nm() {
        let v = cube(3, 8.0, |_, _, _| true);
        let d = downsample(&v, 3).unwrap();
        assert_eq!(d.dims(), [1, 1, 1]);
        assert_eq!(d.voxel_size(), 24.0);
        assert_eq!(d.data(), &[1]);
    }

    #[test]
    fn downsample_majority_rule() {
        // majority oracle: count the covered voxels directly
        let three = cube(2, 8.0, |x, y, z| x + 2 * y + 4 * z < 3);
        assert_eq!(three.foreground_count(), 3);
        assert_eq!(downsample(&three, 2).unwrap().data(), &[0]);
        let four = cube(2, 8.0, |x, y, z| x + 2 * y + 4 * z < 4);
        assert_eq!(downsample(&four, 2).unwrap().data(), &[1], "ties go to foreground");
    }

    #[test]
    fn downsample_partial_blocks_and_dims() {
        let v = VoxelVolume::from_fn([5, 4, 3], 8.0, Point3::origin(), |x, _, _| x == 4).unwrap();
        let d = downsample(&v, 2).unwrap();
        assert_eq!(d.dims(), [3, 2, 2]);
        // the last x block covers only x = 4, which is all foreground
        assert_eq!(d.get(2, 0, 0), 1);
        assert_eq!(d.get(1, 0, 0), 0);
    }

    #[test]
    fn downsample_labels_keeps_plurality_label() {
        let data = vec![5, 5, 7, 0, 0, 0, 0, 0];
        let v = VoxelVolume::new([2, 2, 2], 8.0, Point3::origin(), data).unwrap();
        assert_eq!(downsample(&v, 2).unwrap().data(), &[0]);
        let data = vec![5, 5, 7, 7, 7, 0, 0, 0];
        let v = VoxelVolume::new([2, 2, 2], 8.0, Point3::origin(), data).unwrap();
        assert_eq!(downsample(&v, 2).unwrap().data(), &[7]);
    }

    #[test]
    fn padding_preserves_positions() {
        let v = cube(2, 24.0, |x, _, _| x == 1);
        let p = v.padded(2);
        assert_eq!(p.dims(), [6, 6, 6]);
        assert_eq!(p.get(3, 2, 2), 1);
        assert_eq!(p.position(3, 2, 2), v.position(1, 0, 0));
        assert_eq!(p.foreground_count(), v.foreground_count());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn downsample_composes_geometrically(
                nx in 1usize..20, ny in 1usize..20, nz in 1usize..20,
                a in 1usize..4, b in 1usize..4,
            ) {
                let v = VoxelVolume::zeros([nx, ny, nz], 8.0, Point3::origin()).unwrap();
                let ab = downsample(&downsample(&v, a).unwrap(), b).unwrap();
                let direct = downsample(&v, a * b).unwrap();
                prop_assert_eq!(ab.dims(), direct.dims());
                prop_assert!((ab.voxel_size() - direct.voxel_size()).abs() < 1e-12);
            }
        }
    }
}
