use super::{VolumeError, VoxelVolume};
use serde::{Deserialize, Serialize};

/// About one (72 nm)^3 cube at 24 nm voxels.
pub const DEFAULT_MIN_VOXELS: u64 = 27;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub enum Connectivity {
    /// Face neighbors.
    Six,
    /// Face and edge neighbors.
    Eighteen,
    /// Face, edge and corner neighbors.
    #[default]
    TwentySix,
}

impl TryFrom<u32> for Connectivity {
    type Error = VolumeError;

    fn try_from(value: u32) -> Result<Self, Self::Error> {
        match value {
            6 => Ok(Connectivity::Six),
            18 => Ok(Connectivity::Eighteen),
            26 => Ok(Connectivity::TwentySix),
            other => Err(VolumeError::InvalidConnectivity(other)),
        }
    }
}

impl From<Connectivity> for u32 {
    fn from(c: Connectivity) -> u32 {
        match c {
            Connectivity::Six => 6,
            Connectivity::Eighteen => 18,
            Connectivity::TwentySix => 26,
        }
    }
}

impl Connectivity {
    /// All neighbor offsets under this connectivity.
    pub fn offsets(self) -> Vec<[i64; 3]> {
        let max_nonzero = match self {
            Connectivity::Six => 1,
            Connectivity::Eighteen => 2,
            Connectivity::TwentySix => 3,
        };
        let mut out = Vec::new();
        for dz in -1i64..=1 {
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    let nz = (dx != 0) as usize + (dy != 0) as usize + (dz != 0) as usize;
                    if nz >= 1 && nz <= max_nonzero {
                        out.push([dx, dy, dz]);
                    }
                }
            }
        }
        out
    }

    /// Offsets of neighbors visited before the current voxel in raster order.
    fn backward_offsets(self) -> Vec<[i64; 3]> {
        self.offsets()
            .into_iter()
            .filter(|&[dx, dy, dz]| dz < 0 || (dz == 0 && (dy < 0 || (dy == 0 && dx < 0))))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceIndex {
    pub instance_id: u32,
    pub voxel_count: u64,
    /// Inclusive `[min, max]` voxel range per axis.
    pub bounding_box: [[usize; 2]; 3],
}

struct DisjointSet {
    parent: Vec<u32>,
}

impl DisjointSet {
    fn new() -> Self {
        // slot 0 is background
        Self { parent: vec![0] }
    }

    fn make(&mut self) -> u32 {
        let id = self.parent.len() as u32;
        self.parent.push(id);
        id
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let up = self.parent[self.parent[x as usize] as usize];
            self.parent[x as usize] = up;
            x = up;
        }
        x
    }

    fn union(&mut self, a: u32, b: u32) -> u32 {
        let (ra, rb) = (self.find(a), self.find(b));
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        self.parent[hi as usize] = lo;
        lo
    }
}

/// Labels the connected foreground components of a binary volume.
///
/// Two-pass union-find over raster order. Labels are `1..=K`, ordered by
/// descending voxel count; equal sizes keep raster order of their first
/// voxel.
pub fn connected_components(
    vol: &VoxelVolume,
    connectivity: Connectivity,
) -> Result<(VoxelVolume, Vec<InstanceIndex>), VolumeError> {
    vol.ensure_binary()?;
    let [nx, ny, nz] = vol.dims();
    let backward = connectivity.backward_offsets();
    let mut provisional = vec![0u32; vol.len()];
    let mut sets = DisjointSet::new();

    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                let i = vol.index(x, y, z);
                if vol.data()[i] == 0 {
                    continue;
                }
                let mut label = 0u32;
                for &[dx, dy, dz] in &backward {
                    let (qx, qy, qz) = (x as i64 + dx, y as i64 + dy, z as i64 + dz);
                    if qx < 0 || qy < 0 || qz < 0 || qx >= nx as i64 || qy >= ny as i64 {
                        continue;
                    }
                    let q = vol.index(qx as usize, qy as usize, qz as usize);
                    let ql = provisional[q];
                    if ql == 0 {
                        continue;
                    }
                    label = if label == 0 { ql } else { sets.union(label, ql) };
                }
                provisional[i] = if label == 0 { sets.make() } else { label };
            }
        }
    }

    // resolve roots and gather statistics per root, in raster order of first voxel
    let mut root_slot = vec![u32::MAX; sets.parent.len()];
    let mut stats: Vec<InstanceIndex> = Vec::new();
    for (i, l) in provisional.iter_mut().enumerate() {
        if *l == 0 {
            continue;
        }
        let root = sets.find(*l) as usize;
        let [x, y, z] = vol.coords(i);
        if root_slot[root] == u32::MAX {
            root_slot[root] = stats.len() as u32;
            stats.push(InstanceIndex {
                instance_id: 0,
                voxel_count: 0,
                bounding_box: [[x, x], [y, y], [z, z]],
            });
        }
        let slot = root_slot[root];
        let s = &mut stats[slot as usize];
        s.voxel_count += 1;
        for (a, c) in [x, y, z].into_iter().enumerate() {
            s.bounding_box[a][0] = s.bounding_box[a][0].min(c);
            s.bounding_box[a][1] = s.bounding_box[a][1].max(c);
        }
        *l = slot + 1;
    }

    let mut order: Vec<usize> = (0..stats.len()).collect();
    order.sort_by(|&a, &b| stats[b].voxel_count.cmp(&stats[a].voxel_count).then(a.cmp(&b)));
    let mut final_label = vec![0u32; stats.len() + 1];
    for (rank, &slot) in order.iter().enumerate() {
        final_label[slot + 1] = rank as u32 + 1;
    }
    for l in provisional.iter_mut() {
        *l = final_label[*l as usize];
    }
    let instances = order
        .iter()
        .enumerate()
        .map(|(rank, &slot)| InstanceIndex {
            instance_id: rank as u32 + 1,
            ..stats[slot].clone()
        })
        .collect();

    let labeled = VoxelVolume::new(vol.dims(), vol.voxel_size(), vol.origin(), provisional)?;
    Ok((labeled, instances))
}

/// Drops components with fewer than `min_voxels` voxels and renumbers the
/// survivors contiguously, keeping their order.
pub fn filter_small_components(
    labeled: &VoxelVolume,
    instances: &[InstanceIndex],
    min_voxels: u64,
) -> (VoxelVolume, Vec<InstanceIndex>) {
    let max_id = instances.iter().map(|i| i.instance_id).max().unwrap_or(0) as usize;
    let mut remap = vec![0u32; max_id + 1];
    let mut kept = Vec::new();
    for inst in instances.iter().filter(|i| i.voxel_count >= min_voxels) {
        let id = kept.len() as u32 + 1;
        remap[inst.instance_id as usize] = id;
        kept.push(InstanceIndex {
            instance_id: id,
            ..inst.clone()
        });
    }
    let data = labeled
        .data()
        .iter()
        .map(|&l| remap.get(l as usize).copied().unwrap_or(0))
        .collect();
    let vol = VoxelVolume::new(labeled.dims(), labeled.voxel_size(), labeled.origin(), data)
        .expect("same geometry as a valid volume");
    (vol, kept)
}

/// Crops one instance out of a label volume as a binary mask with `pad`
/// background voxels on each side. The origin moves with the crop so every
/// voxel keeps its physical position.
pub fn extract_instance(
    labeled: &VoxelVolume,
    id: u32,
    pad: usize,
) -> Result<VoxelVolume, VolumeError> {
    let mut bb: Option<[[usize; 2]; 3]> = None;
    for (i, &l) in labeled.data().iter().enumerate() {
        if l != id || id == 0 {
            continue;
        }
        let c = labeled.coords(i);
        let b = bb.get_or_insert([[c[0], c[0]], [c[1], c[1]], [c[2], c[2]]]);
        for a in 0..3 {
            b[a][0] = b[a][0].min(c[a]);
            b[a][1] = b[a][1].max(c[a]);
        }
    }
    let bb = bb.ok_or(VolumeError::UnknownInstance(id))?;
    let dims = [
        bb[0][1] - bb[0][0] + 1 + 2 * pad,
        bb[1][1] - bb[1][0] + 1 + 2 * pad,
        bb[2][1] - bb[2][0] + 1 + 2 * pad,
    ];
    let vs = labeled.voxel_size();
    let origin = labeled.origin()
        + nalgebra::Vector3::new(
            bb[0][0] as f64 - pad as f64,
            bb[1][0] as f64 - pad as f64,
            bb[2][0] as f64 - pad as f64,
        ) * vs;
    VoxelVolume::from_fn(dims, vs, origin, |x, y, z| {
        let inside = |c: usize, a: usize| c >= pad && c - pad + bb[a][0] <= bb[a][1];
        if !(inside(x, 0) && inside(y, 1) && inside(z, 2)) {
            return false;
        }
        labeled.get(x - pad + bb[0][0], y - pad + bb[1][0], z - pad + bb[2][0]) == id
    })
}
