//! Hole filling for orientable meshes with simple boundary loops.

use super::{MeshError, TriangleMesh};
use crate::geometry::{Point3, Vector3};
use std::collections::HashMap;

/// Closes every boundary loop with a flat ear-clipped patch.
///
/// Each loop is projected onto its Newell plane and triangulated without
/// adding vertices; patch triangles follow the orientation of the
/// surrounding surface. A mesh that is already watertight comes back
/// unchanged.
pub fn make_watertight(mesh: &TriangleMesh) -> Result<TriangleMesh, MeshError> {
    mesh.validate()?;
    let mut directed: HashMap<(u32, u32), usize> = HashMap::new();
    let mut undirected: HashMap<(u32, u32), usize> = HashMap::new();
    for t in &mesh.triangles {
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            let d = directed.entry((a, b)).or_default();
            *d += 1;
            if *d > 1 {
                return Err(MeshError::NonOrientable(a, b));
            }
            let u = undirected.entry((a.min(b), a.max(b))).or_default();
            *u += 1;
            if *u > 2 {
                return Err(MeshError::NonManifold(a.min(b), a.max(b)));
            }
        }
    }
    // patch half-edges run opposite to the open ones
    let mut next: HashMap<u32, u32> = HashMap::new();
    let mut open: Vec<(u32, u32)> = directed
        .keys()
        .filter(|&&(a, b)| !directed.contains_key(&(b, a)))
        .map(|&(a, b)| (b, a))
        .collect();
    if open.is_empty() {
        return Ok(mesh.clone());
    }
    open.sort_unstable();
    for &(a, b) in &open {
        if next.insert(a, b).is_some() {
            return Err(MeshError::SelfIntersectingLoop(a));
        }
    }

    let mut out = mesh.clone();
    let mut visited: HashMap<u32, bool> = HashMap::new();
    for &(start, _) in &open {
        if visited.contains_key(&start) {
            continue;
        }
        let mut lp = Vec::new();
        let mut v = start;
        loop {
            if visited.insert(v, true).is_some() {
                if v != start {
                    return Err(MeshError::SelfIntersectingLoop(v));
                }
                break;
            }
            lp.push(v);
            v = match next.get(&v) {
                Some(&w) => w,
                None => return Err(MeshError::SelfIntersectingLoop(v)),
            };
        }
        out.triangles.extend(triangulate_loop(&mesh.vertices, &lp)?);
    }
    out.ensure_watertight()?;
    Ok(out)
}

fn triangulate_loop(vertices: &[Point3], lp: &[u32]) -> Result<Vec<[u32; 3]>, MeshError> {
    if lp.len() == 3 {
        return Ok(vec![[lp[0], lp[1], lp[2]]]);
    }
    let pts: Vec<Point3> = lp.iter().map(|&i| vertices[i as usize]).collect();
    let n = pts.len();
    // Newell normal of the loop
    let mut normal = Vector3::zeros();
    for i in 0..n {
        let (p, q) = (pts[i], pts[(i + 1) % n]);
        normal.x += (p.y - q.y) * (p.z + q.z);
        normal.y += (p.z - q.z) * (p.x + q.x);
        normal.z += (p.x - q.x) * (p.y + q.y);
    }
    let normal = normal
        .try_normalize(0.0)
        .unwrap_or_else(|| Vector3::new(0.0, 0.0, 1.0));
    let helper = if normal.x.abs() < 0.9 {
        Vector3::x()
    } else {
        Vector3::y()
    };
    let u = normal.cross(&helper).normalize();
    let w = normal.cross(&u);
    // (u, w, normal) is right-handed, so the loop is counter-clockwise in 2D
    let flat: Vec<[f64; 2]> = pts
        .iter()
        .map(|p| [p.coords.dot(&u), p.coords.dot(&w)])
        .collect();

    if polygon_self_intersects(&flat) {
        return Err(MeshError::SelfIntersectingLoop(lp[0]));
    }

    let cross = |a: [f64; 2], b: [f64; 2], c: [f64; 2]| {
        (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
    };
    let mut idx: Vec<usize> = (0..n).collect();
    let mut tris = Vec::with_capacity(n - 2);
    while idx.len() > 3 {
        let m = idx.len();
        let mut best: Option<(usize, f64)> = None;
        let mut fallback: Option<(usize, f64)> = None;
        for k in 0..m {
            let (ia, ib, ic) = (idx[(k + m - 1) % m], idx[k], idx[(k + 1) % m]);
            let turn = cross(flat[ia], flat[ib], flat[ic]);
            if fallback.map_or(true, |(_, t)| turn > t) {
                fallback = Some((k, turn));
            }
            if turn <= 0.0 {
                continue;
            }
            let blocked = idx.iter().any(|&j| {
                j != ia
                    && j != ib
                    && j != ic
                    && cross(flat[ia], flat[ib], flat[j]) >= 0.0
                    && cross(flat[ib], flat[ic], flat[j]) >= 0.0
                    && cross(flat[ic], flat[ia], flat[j]) >= 0.0
            });
            if blocked {
                continue;
            }
            // prefer well-shaped ears: largest minimum angle proxy
            let quality = turn
                / ((flat[ia][0] - flat[ic][0]).powi(2) + (flat[ia][1] - flat[ic][1]).powi(2))
                    .max(f64::MIN_POSITIVE);
            if best.map_or(true, |(_, q)| quality > q) {
                best = Some((k, quality));
            }
        }
        let k = best.or(fallback).expect("polygon has vertices").0;
        let (ia, ib, ic) = (idx[(k + m - 1) % m], idx[k], idx[(k + 1) % m]);
        tris.push([lp[ia], lp[ib], lp[ic]]);
        idx.remove(k);
    }
    tris.push([lp[idx[0]], lp[idx[1]], lp[idx[2]]]);
    Ok(tris)
}

fn polygon_self_intersects(p: &[[f64; 2]]) -> bool {
    let n = p.len();
    let orient = |a: [f64; 2], b: [f64; 2], c: [f64; 2]| {
        let v = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
        if v > 0.0 {
            1
        } else if v < 0.0 {
            -1
        } else {
            0
        }
    };
    for i in 0..n {
        let (a, b) = (p[i], p[(i + 1) % n]);
        for j in i + 1..n {
            // skip edges sharing a vertex
            if j == i || (j + 1) % n == i || (i + 1) % n == j {
                continue;
            }
            let (c, d) = (p[j], p[(j + 1) % n]);
            let (o1, o2) = (orient(a, b, c), orient(a, b, d));
            let (o3, o4) = (orient(c, d, a), orient(c, d, b));
            if o1 * o2 < 0 && o3 * o4 < 0 {
                return true;
            }
        }
    }
    false
}
