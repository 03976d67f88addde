//! Closed test shapes: boxes, icospheres, tori and open squares.

use super::TriangleMesh;
use crate::geometry::{Point3, Vector3};
use std::collections::HashMap;

/// Axis-aligned box with outward-facing triangles, two per face, face by face.
pub fn axis_box(min: Point3, max: Point3) -> TriangleMesh {
    let v = |i: usize| {
        Point3::new(
            if i & 1 == 0 { min.x } else { max.x },
            if i & 2 == 0 { min.y } else { max.y },
            if i & 4 == 0 { min.z } else { max.z },
        )
    };
    let vertices = (0..8).map(v).collect();
    // quads listed counter-clockwise seen from outside
    let quads: [[u32; 4]; 6] = [
        [0, 2, 3, 1], // z = min
        [4, 5, 7, 6], // z = max
        [0, 1, 5, 4], // y = min
        [2, 6, 7, 3], // y = max
        [0, 4, 6, 2], // x = min
        [1, 3, 7, 5], // x = max
    ];
    let triangles = quads
        .iter()
        .flat_map(|q| [[q[0], q[1], q[2]], [q[0], q[2], q[3]]])
        .collect();
    TriangleMesh {
        vertices,
        triangles,
        provenance: None,
    }
}

/// Subdivided icosahedron projected onto a sphere.
pub fn icosphere(center: Point3, radius: f64, subdivisions: u32) -> TriangleMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut verts: Vec<Vector3> = [
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ]
    .iter()
    .map(|v| Vector3::from(*v).normalize())
    .collect();
    let mut faces: Vec<[u32; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut cache: HashMap<(u32, u32), u32> = HashMap::new();
        let mut mid = |a: u32, b: u32, verts: &mut Vec<Vector3>| -> u32 {
            *cache.entry((a.min(b), a.max(b))).or_insert_with(|| {
                verts.push(((verts[a as usize] + verts[b as usize]) * 0.5).normalize());
                (verts.len() - 1) as u32
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for [a, b, c] in faces {
            let ab = mid(a, b, &mut verts);
            let bc = mid(b, c, &mut verts);
            let ca = mid(c, a, &mut verts);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    TriangleMesh {
        vertices: verts
            .into_iter()
            .map(|v| center + v * radius)
            .collect(),
        triangles: faces,
        provenance: None,
    }
}

/// Torus around the z axis.
pub fn torus(center: Point3, major: f64, minor: f64, rings: usize, sides: usize) -> TriangleMesh {
    let mut vertices = Vec::with_capacity(rings * sides);
    for i in 0..rings {
        let u = i as f64 / rings as f64 * std::f64::consts::TAU;
        for j in 0..sides {
            let v = j as f64 / sides as f64 * std::f64::consts::TAU;
            let r = major + minor * v.cos();
            vertices.push(center + Vector3::new(r * u.cos(), r * u.sin(), minor * v.sin()));
        }
    }
    let id = |i: usize, j: usize| ((i % rings) * sides + (j % sides)) as u32;
    let mut triangles = Vec::with_capacity(2 * rings * sides);
    for i in 0..rings {
        for j in 0..sides {
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            triangles.push([a, b, c]);
            triangles.push([a, c, d]);
        }
    }
    TriangleMesh {
        vertices,
        triangles,
        provenance: None,
    }
}

/// Open axis-aligned square in the plane `z = z`, side `side`, centered at
/// the origin in x/y.
pub fn square(side: f64, z: f64) -> TriangleMesh {
    let h = side / 2.0;
    TriangleMesh {
        vertices: vec![
            Point3::new(-h, -h, z),
            Point3::new(h, -h, z),
            Point3::new(h, h, z),
            Point3::new(-h, h, z),
        ],
        triangles: vec![[0, 1, 2], [0, 2, 3]],
        provenance: None,
    }
}
