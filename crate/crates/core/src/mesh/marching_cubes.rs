//! Marching cubes over a regular scalar grid.
//!
//! The 256-entry case table is built once from a fixed face rule: on every
//! cube face, each cyclic run of inside corners is cut off by one segment.
//! Ambiguous faces therefore always separate their inside corners, and the
//! two cells sharing a face emit the same segment with opposite direction.
//! Segments chain into closed loops per cell; loops of three become one
//! triangle, quads are split along a diagonal that does not lie on a cube
//! face, and longer loops get a center vertex. All interior edges are private
//! to their cell, so the output is edge-manifold and consistently oriented
//! whenever the field is closed off by a border below the iso level.

use super::{MeshError, TriangleMesh};
use crate::geometry::{Point3, Vector3};
use crate::volume::VoxelVolume;
use std::collections::HashMap;
use std::sync::OnceLock;

/// Corner `c` sits at `(c & 1, (c >> 1) & 1, (c >> 2) & 1)`.
fn corner_pos(c: usize) -> Vector3 {
    Vector3::new((c & 1) as f64, ((c >> 1) & 1) as f64, ((c >> 2) & 1) as f64)
}

/// Edge `4 * axis + k` joins corner `base` and `base | (1 << axis)`, where
/// `base` is the k-th corner with the axis bit clear.
const fn edge_corners() -> [[usize; 2]; 12] {
    let mut out = [[0usize; 2]; 12];
    let mut axis = 0;
    while axis < 3 {
        let mut k = 0;
        let mut c = 0;
        while c < 8 {
            if c & (1 << axis) == 0 {
                out[4 * axis + k] = [c, c | (1 << axis)];
                k += 1;
            }
            c += 1;
        }
        axis += 1;
    }
    out
}

const EDGES: [[usize; 2]; 12] = edge_corners();

fn edge_between(a: usize, b: usize) -> usize {
    EDGES
        .iter()
        .position(|e| (e[0] == a && e[1] == b) || (e[0] == b && e[1] == a))
        .expect("corners are adjacent")
}

/// Per configuration: closed loops of edge indices, oriented so the loop
/// normal points from inside corners to outside corners.
type CaseTable = Vec<Vec<Vec<u8>>>;

fn case_table() -> &'static CaseTable {
    static TABLE: OnceLock<CaseTable> = OnceLock::new();
    TABLE.get_or_init(build_case_table)
}

fn build_case_table() -> CaseTable {
    // faces as (cyclic corner order, outward normal)
    let mut faces: Vec<([usize; 4], Vector3)> = Vec::new();
    for axis in 0..3 {
        let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
        for side in 0..2 {
            let b = side << axis;
            let cyc = [b, b | (1 << u), b | (1 << u) | (1 << v), b | (1 << v)];
            let mut n = Vector3::zeros();
            n[axis] = if side == 0 { -1.0 } else { 1.0 };
            faces.push((cyc, n));
        }
    }
    let mid = |e: usize| (corner_pos(EDGES[e][0]) + corner_pos(EDGES[e][1])) * 0.5;

    (0..256usize)
        .map(|config| {
            let inside = |c: usize| config & (1 << c) != 0;
            let mut next: HashMap<usize, usize> = HashMap::new();
            for (cyc, n) in &faces {
                let flags: Vec<bool> = cyc.iter().map(|&c| inside(c)).collect();
                let count = flags.iter().filter(|&&f| f).count();
                if count == 0 || count == 4 {
                    continue;
                }
                // each maximal cyclic run of inside corners yields one segment
                for start in 0..4 {
                    if !flags[start] || flags[(start + 3) % 4] {
                        continue;
                    }
                    let mut run = vec![cyc[start]];
                    let mut k = start;
                    while flags[(k + 1) % 4] {
                        k = (k + 1) % 4;
                        run.push(cyc[k]);
                    }
                    let e_in = edge_between(cyc[(start + 3) % 4], cyc[start]);
                    let e_out = edge_between(cyc[k], cyc[(k + 1) % 4]);
                    let centroid =
                        run.iter().map(|&c| corner_pos(c)).sum::<Vector3>() / run.len() as f64;
                    let (a, b) = (mid(e_in), mid(e_out));
                    let toward_outside = (a + b) * 0.5 - centroid;
                    let dir = toward_outside.cross(n);
                    let (s, t) = if (b - a).dot(&dir) >= 0.0 {
                        (e_in, e_out)
                    } else {
                        (e_out, e_in)
                    };
                    let prev = next.insert(s, t);
                    debug_assert!(prev.is_none());
                }
            }
            let mut loops = Vec::new();
            let mut starts: Vec<usize> = next.keys().copied().collect();
            starts.sort_unstable();
            let mut used = [false; 12];
            for s in starts {
                if used[s] {
                    continue;
                }
                let mut lp = Vec::new();
                let mut e = s;
                while !used[e] {
                    used[e] = true;
                    lp.push(e as u8);
                    e = next[&e];
                }
                debug_assert_eq!(e, s);
                loops.push(lp);
            }
            loops
        })
        .collect()
}

/// Which quad diagonal stays off the cube faces: `false` for 0-2, `true` for 1-3.
fn quad_uses_13(lp: &[u8]) -> bool {
    let faces_of = |e: u8| -> [(usize, usize); 2] {
        let [c0, c1] = EDGES[e as usize];
        let axis = (c0 ^ c1).trailing_zeros() as usize;
        let others: Vec<usize> = (0..3).filter(|&a| a != axis).collect();
        [
            (others[0], (c0 >> others[0]) & 1),
            (others[1], (c0 >> others[1]) & 1),
        ]
    };
    let share = |a: u8, b: u8| {
        let (fa, fb) = (faces_of(a), faces_of(b));
        fa.iter().any(|f| fb.contains(f))
    };
    share(lp[0], lp[2])
}

/// Scalar samples on a regular grid; node `(i, j, k)` sits at
/// `origin + (i, j, k) * spacing`.
#[derive(Debug, Clone)]
pub struct ScalarField {
    pub dims: [usize; 3],
    pub origin: Point3,
    pub spacing: f64,
    pub values: Vec<f64>,
}

impl ScalarField {
    #[inline]
    fn at(&self, x: usize, y: usize, z: usize) -> f64 {
        self.values[x + self.dims[0] * (y + self.dims[1] * z)]
    }

    /// Copy with a one-node border of `value` on every side.
    pub fn padded(&self, value: f64) -> ScalarField {
        let d = self.dims;
        let nd = [d[0] + 2, d[1] + 2, d[2] + 2];
        let mut values = vec![value; nd[0] * nd[1] * nd[2]];
        for z in 0..d[2] {
            for y in 0..d[1] {
                for x in 0..d[0] {
                    values[(x + 1) + nd[0] * ((y + 1) + nd[1] * (z + 1))] = self.at(x, y, z);
                }
            }
        }
        ScalarField {
            dims: nd,
            origin: self.origin - Vector3::repeat(self.spacing),
            spacing: self.spacing,
            values,
        }
    }
}

/// Surface of `{value > iso}`. With `pad = Some(v)` (v below iso) the field is
/// first surrounded by a border of `v` so the surface closes at the grid edge.
pub fn marching_cubes_field(
    field: &ScalarField,
    iso: f64,
    pad: Option<f64>,
) -> Result<TriangleMesh, MeshError> {
    let padded;
    let f = match pad {
        Some(v) => {
            padded = field.padded(v);
            &padded
        }
        None => field,
    };
    let table = case_table();
    let [nx, ny, nz] = f.dims;
    let mut vertices: Vec<Point3> = Vec::new();
    let mut triangles: Vec<[u32; 3]> = Vec::new();
    // grid edge (node index, axis) -> vertex id
    let mut edge_vertex: HashMap<(usize, usize), u32> = HashMap::new();

    if nx < 2 || ny < 2 || nz < 2 {
        return Err(MeshError::EmptyLevelSet(iso));
    }
    for z in 0..nz - 1 {
        for y in 0..ny - 1 {
            for x in 0..nx - 1 {
                let mut vals = [0.0f64; 8];
                let mut config = 0usize;
                for (c, v) in vals.iter_mut().enumerate() {
                    *v = f.at(x + (c & 1), y + ((c >> 1) & 1), z + ((c >> 2) & 1));
                    if *v > iso {
                        config |= 1 << c;
                    }
                }
                if config == 0 || config == 255 {
                    continue;
                }
                let mut vid = |e: u8| -> u32 {
                    let [c0, c1] = EDGES[e as usize];
                    let axis = (c0 ^ c1).trailing_zeros() as usize;
                    let n0 = [x + (c0 & 1), y + ((c0 >> 1) & 1), z + ((c0 >> 2) & 1)];
                    let key = (n0[0] + nx * (n0[1] + ny * n0[2]), axis);
                    *edge_vertex.entry(key).or_insert_with(|| {
                        let (v0, v1) = (vals[c0], vals[c1]);
                        let t = ((iso - v0) / (v1 - v0)).clamp(1e-3, 1.0 - 1e-3);
                        let mut p = Vector3::new(n0[0] as f64, n0[1] as f64, n0[2] as f64);
                        p[axis] += t;
                        vertices.push(f.origin + p * f.spacing);
                        (vertices.len() - 1) as u32
                    })
                };
                let loops: Vec<Vec<u32>> = table[config]
                    .iter()
                    .map(|lp| lp.iter().map(|&e| vid(e)).collect())
                    .collect();
                for (lp, ids) in table[config].iter().zip(loops) {
                    match ids.len() {
                        3 => triangles.push([ids[0], ids[1], ids[2]]),
                        4 => {
                            if quad_uses_13(lp) {
                                triangles.push([ids[1], ids[2], ids[3]]);
                                triangles.push([ids[1], ids[3], ids[0]]);
                            } else {
                                triangles.push([ids[0], ids[1], ids[2]]);
                                triangles.push([ids[0], ids[2], ids[3]]);
                            }
                        }
                        n => {
                            let center = ids
                                .iter()
                                .map(|&i| vertices[i as usize].coords)
                                .sum::<Vector3>()
                                / n as f64;
                            vertices.push(Point3::from(center));
                            let c = (vertices.len() - 1) as u32;
                            for k in 0..n {
                                triangles.push([ids[k], ids[(k + 1) % n], c]);
                            }
                        }
                    }
                }
            }
        }
    }
    if triangles.is_empty() {
        return Err(MeshError::EmptyLevelSet(iso));
    }
    Ok(TriangleMesh {
        vertices,
        triangles,
        provenance: None,
    })
}

/// Meshes a binary mask at `iso` (usually 0.5). The mask is zero-padded by
/// one voxel first, so the result is closed even where foreground touches
/// the crop boundary. Vertices are in physical units.
pub fn marching_cubes(mask: &VoxelVolume, iso: f64) -> Result<TriangleMesh, MeshError> {
    if !(iso > 0.0 && iso < 1.0) {
        return Err(MeshError::InvalidIso(iso));
    }
    if !mask.is_binary() {
        return Err(MeshError::NonBinaryMask);
    }
    if mask.foreground_count() == 0 {
        return Err(MeshError::EmptyMask);
    }
    let field = ScalarField {
        dims: mask.dims(),
        origin: mask.origin(),
        spacing: mask.voxel_size(),
        values: mask.data().iter().map(|&v| v as f64).collect(),
    };
    marching_cubes_field(&field, iso, Some(0.0))
}
