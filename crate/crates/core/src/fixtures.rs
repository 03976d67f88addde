//! Synthetic inputs with known geometry: voxel balls, random blobs and
//! mitochondrion-like bent tubes. Used by tests, benches and demos.

use crate::geometry::{Point3, Vector3};
use crate::mesh::{make_watertight, marching_cubes, TriangleMesh};
use crate::seed;
use crate::volume::{
    connected_components, downsample, extract_instance, Connectivity, VoxelVolume,
};
use rand::Rng;

/// Ball of radius `radius_voxels` centered in a cube with two voxels of
/// clearance on each side.
pub fn voxel_ball(radius_voxels: f64, voxel_size: f64) -> VoxelVolume {
    let n = (2.0 * radius_voxels).ceil() as usize + 5;
    let c = (n - 1) as f64 / 2.0;
    VoxelVolume::from_fn([n, n, n], voxel_size, Point3::origin(), |x, y, z| {
        let d = Vector3::new(x as f64 - c, y as f64 - c, z as f64 - c);
        d.norm() <= radius_voxels
    })
    .expect("valid geometry")
}

/// `n^3` volume holding five balls that do not touch, even diagonally.
pub fn five_balls(n: usize, voxel_size: f64, seed_value: u64) -> VoxelVolume {
    let mut rng = seed::rng(seed_value);
    let mut balls: Vec<(Vector3, f64)> = Vec::new();
    while balls.len() < 5 {
        let r = rng.random_range(2.0..(n as f64 / 8.0).max(2.5));
        let lo = r + 1.0;
        let hi = n as f64 - 2.0 - r;
        let c = Vector3::new(
            rng.random_range(lo..hi),
            rng.random_range(lo..hi),
            rng.random_range(lo..hi),
        );
        // gap of more than two voxels between surfaces keeps them apart under 26-connectivity
        if balls.iter().all(|(o, s)| (o - c).norm() > r + s + 3.0) {
            balls.push((c, r));
        }
    }
    VoxelVolume::from_fn([n, n, n], voxel_size, Point3::origin(), |x, y, z| {
        let p = Vector3::new(x as f64, y as f64, z as f64);
        balls.iter().any(|(c, r)| (p - c).norm() <= *r)
    })
    .expect("valid geometry")
}

/// Union of a few random balls: an irregular, mostly connected blob.
pub fn random_blob(dims: [usize; 3], voxel_size: f64, seed_value: u64) -> VoxelVolume {
    let mut rng = seed::rng(seed_value);
    let m = dims.iter().copied().min().unwrap_or(1) as f64;
    let center = Vector3::new(dims[0] as f64, dims[1] as f64, dims[2] as f64) / 2.0;
    let balls: Vec<(Vector3, f64)> = (0..6)
        .map(|_| {
            let off = Vector3::new(
                rng.random_range(-0.2..0.2),
                rng.random_range(-0.2..0.2),
                rng.random_range(-0.2..0.2),
            ) * m;
            (center + off, rng.random_range(0.12..0.3) * m)
        })
        .collect();
    VoxelVolume::from_fn(dims, voxel_size, Point3::origin(), |x, y, z| {
        let p = Vector3::new(x as f64, y as f64, z as f64);
        balls.iter().any(|(c, r)| (p - c).norm() <= *r)
    })
    .expect("valid geometry")
}

/// Bent tube with rounded ends, roughly mitochondrion sized: length
/// 0.6-1.6 um, radius 110-180 nm, rasterized at `voxel_size`.
pub fn mitochondrion_volume(voxel_size: f64, seed_value: u64) -> VoxelVolume {
    let mut rng = seed::rng(seed_value);
    let length = rng.random_range(600.0..1600.0);
    let radius = rng.random_range(110.0..180.0);
    let bend = rng.random_range(-0.35..0.35) * length;
    let twist = rng.random_range(-0.2..0.2) * length;
    let ctrl = [
        Vector3::new(-length / 2.0, 0.0, 0.0),
        Vector3::new(0.0, bend, twist),
        Vector3::new(length / 2.0, 0.0, 0.0),
    ];
    let path: Vec<Vector3> = (0..=48)
        .map(|i| {
            let t = i as f64 / 48.0;
            ctrl[0] * (1.0 - t).powi(2) + ctrl[1] * (2.0 * t * (1.0 - t)) + ctrl[2] * t * t
        })
        .collect();
    let lo = path.iter().fold(Vector3::repeat(f64::INFINITY), |a, p| a.inf(p))
        - Vector3::repeat(radius + 2.0 * voxel_size);
    let hi = path.iter().fold(Vector3::repeat(f64::NEG_INFINITY), |a, p| a.sup(p))
        + Vector3::repeat(radius + 2.0 * voxel_size);
    let dims = [0, 1, 2].map(|a| ((hi[a] - lo[a]) / voxel_size).ceil() as usize + 1);
    let seg_dist = |p: &Vector3, a: &Vector3, b: &Vector3| {
        let ab = b - a;
        let t = ((p - a).dot(&ab) / ab.norm_squared()).clamp(0.0, 1.0);
        (p - (a + ab * t)).norm()
    };
    VoxelVolume::from_fn(dims, voxel_size, Point3::from(lo), |x, y, z| {
        let p = lo + Vector3::new(x as f64, y as f64, z as f64) * voxel_size;
        path.windows(2).any(|w| seg_dist(&p, &w[0], &w[1]) <= radius)
    })
    .expect("valid geometry")
}

/// Mitochondrion mesh in nanometers through the full volume pipeline:
/// 8 nm raster, downsample to 24 nm, components, extraction, marching cubes.
pub fn mitochondrion_mesh(seed_value: u64) -> TriangleMesh {
    let fine = mitochondrion_volume(8.0, seed_value);
    let coarse = downsample(&fine, 3).expect("factor 3");
    let (labeled, instances) =
        connected_components(&coarse, Connectivity::TwentySix).expect("binary");
    let id = instances[0].instance_id;
    let mask = extract_instance(&labeled, id, 1).expect("instance exists");
    let mesh = marching_cubes(&mask, 0.5).expect("non-empty");
    make_watertight(&mesh)
        .expect("marching cubes output is closed")
        .with_provenance(Some(id))
}

/// A small corpus of distinct mitochondrion meshes.
pub fn mitochondrion_corpus(count: usize, seed_value: u64) -> Vec<TriangleMesh> {
    (0..count as u64)
        .map(|i| mitochondrion_mesh(seed::derive_seed(seed_value, 0, i)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn five_balls_really_has_five_components() {
        for s in 0..5 {
            let v = five_balls(64, 24.0, s);
            let (_, inst) = connected_components(&v, Connectivity::TwentySix).unwrap();
            assert_eq!(inst.len(), 5);
        }
    }

    #[test]
    fn mitochondrion_mesh_is_closed_and_sized() {
        let m = mitochondrion_mesh(3);
        assert!(m.is_watertight());
        let e = m.bounding_box().unwrap().extent();
        assert!(e.max() > 500.0 && e.max() < 2200.0, "{e:?}");
    }
}
