//! Shared inputs for the pipeline benchmarks.

use mitoforge::fixtures::{five_balls, voxel_ball};
use mitoforge::geometry::Point3;
use mitoforge::mesh::primitives::icosphere;
use mitoforge::mesh::{marching_cubes, normalize_unit_cube, sample_surface};
use mitoforge::occupancy::sample_occupancy;
use mitoforge::{EmitterSet, OccupancySampleSet, TriangleMesh, VoxelVolume};

pub const SEED: u64 = 20;

pub fn balls_volume() -> VoxelVolume {
    five_balls(64, 24.0, SEED)
}

pub fn ball_mask() -> VoxelVolume {
    voxel_ball(10.0, 1.0)
}

pub fn unit_sphere() -> TriangleMesh {
    normalize_unit_cube(&icosphere(Point3::origin(), 1.0, 4)).unwrap().0
}

pub fn ball_mesh() -> TriangleMesh {
    marching_cubes(&ball_mask(), 0.5).unwrap()
}

pub fn sphere_samples(n: usize) -> OccupancySampleSet {
    sample_occupancy(&unit_sphere(), n, SEED, "bench sphere").unwrap()
}

/// Emitters on a 1 µm sphere at the default density.
pub fn sphere_emitters() -> EmitterSet {
    sample_surface(&icosphere(Point3::origin(), 500.0, 3), 30.0, SEED).unwrap()
}
