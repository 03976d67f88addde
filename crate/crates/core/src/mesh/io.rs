//! OFF / ASCII OBJ meshes and emitter lists (CSV and binary triplets).

use super::{EmitterSet, MeshError, TriangleMesh};
use crate::geometry::Point3;
use std::fmt::Write as _;
use std::path::Path;

const EMITTER_MAGIC: &[u8; 4] = b"MFEM";

fn parse_f64(tok: Option<&str>, what: &str) -> Result<f64, MeshError> {
    tok.ok_or_else(|| MeshError::Parse(format!("missing {what}")))?
        .parse::<f64>()
        .map_err(|e| MeshError::Parse(format!("{what}: {e}")))
}

fn parse_usize(tok: Option<&str>, what: &str) -> Result<usize, MeshError> {
    tok.ok_or_else(|| MeshError::Parse(format!("missing {what}")))?
        .parse::<usize>()
        .map_err(|e| MeshError::Parse(format!("{what}: {e}")))
}

pub fn to_off(mesh: &TriangleMesh) -> String {
    let mut s = String::new();
    writeln!(s, "OFF").unwrap();
    writeln!(s, "{} {} 0", mesh.vertices.len(), mesh.triangles.len()).unwrap();
    for v in &mesh.vertices {
        writeln!(s, "{:?} {:?} {:?}", v.x, v.y, v.z).unwrap();
    }
    for t in &mesh.triangles {
        writeln!(s, "3 {} {} {}", t[0], t[1], t[2]).unwrap();
    }
    s
}

/// Polygons with more than three corners are fan-triangulated.
pub fn parse_off(text: &str) -> Result<TriangleMesh, MeshError> {
    let mut tokens = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or(""))
        .flat_map(str::split_whitespace);
    match tokens.next() {
        Some("OFF") => {}
        other => return Err(MeshError::Parse(format!("expected OFF header, found {other:?}"))),
    }
    let nv = parse_usize(tokens.next(), "vertex count")?;
    let nf = parse_usize(tokens.next(), "face count")?;
    let _ne = parse_usize(tokens.next(), "edge count")?;
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let x = parse_f64(tokens.next(), "x")?;
        let y = parse_f64(tokens.next(), "y")?;
        let z = parse_f64(tokens.next(), "z")?;
        vertices.push(Point3::new(x, y, z));
    }
    let mut triangles = Vec::with_capacity(nf);
    for _ in 0..nf {
        let k = parse_usize(tokens.next(), "face size")?;
        let idx = (0..k)
            .map(|_| parse_usize(tokens.next(), "face index").map(|i| i as u32))
            .collect::<Result<Vec<_>, _>>()?;
        for j in 1..k.saturating_sub(1) {
            triangles.push([idx[0], idx[j], idx[j + 1]]);
        }
    }
    TriangleMesh::new(vertices, triangles)
}

pub fn to_obj(mesh: &TriangleMesh) -> String {
    let mut s = String::new();
    for v in &mesh.vertices {
        writeln!(s, "v {:?} {:?} {:?}", v.x, v.y, v.z).unwrap();
    }
    for t in &mesh.triangles {
        writeln!(s, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1).unwrap();
    }
    s
}

/// Reads `v` and `f` records; texture/normal references (`1/2/3`) and
/// negative indices are accepted.
pub fn parse_obj(text: &str) -> Result<TriangleMesh, MeshError> {
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("v") => {
                let x = parse_f64(tok.next(), "x")?;
                let y = parse_f64(tok.next(), "y")?;
                let z = parse_f64(tok.next(), "z")?;
                vertices.push(Point3::new(x, y, z));
            }
            Some("f") => {
                let idx = tok
                    .map(|t| {
                        let first = t.split('/').next().unwrap_or("");
                        let i: i64 = first.parse().map_err(|e| {
                            MeshError::Parse(format!("line {}: {e}", lineno + 1))
                        })?;
                        let resolved = if i < 0 { vertices.len() as i64 + i } else { i - 1 };
                        u32::try_from(resolved)
                            .map_err(|_| MeshError::Parse(format!("line {}: bad index", lineno + 1)))
                    })
                    .collect::<Result<Vec<u32>, _>>()?;
                for j in 1..idx.len().saturating_sub(1) {
                    triangles.push([idx[0], idx[j], idx[j + 1]]);
                }
            }
            _ => {}
        }
    }
    TriangleMesh::new(vertices, triangles)
}

/// Chooses OFF or OBJ by extension.
pub fn read_mesh(path: &Path) -> Result<TriangleMesh, MeshError> {
    let text = std::fs::read_to_string(path)?;
    match extension(path).as_deref() {
        Some("obj") => parse_obj(&text),
        _ => parse_off(&text),
    }
}

pub fn write_mesh(mesh: &TriangleMesh, path: &Path) -> Result<(), MeshError> {
    let text = match extension(path).as_deref() {
        Some("obj") => to_obj(mesh),
        _ => to_off(mesh),
    };
    std::fs::write(path, text)?;
    Ok(())
}

fn extension(path: &Path) -> Option<String> {
    path.extension().map(|e| e.to_string_lossy().to_ascii_lowercase())
}

pub fn emitters_to_csv(set: &EmitterSet) -> String {
    let mut s = String::from("x_nm,y_nm,z_nm\n");
    for p in &set.positions {
        writeln!(s, "{:?},{:?},{:?}", p.x, p.y, p.z).unwrap();
    }
    s
}

pub fn emitters_from_csv(text: &str, density: f64, seed: u64) -> Result<EmitterSet, MeshError> {
    let mut positions = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (i == 0 && line.starts_with('x')) {
            continue;
        }
        let mut f = line.split(',');
        let x = parse_f64(f.next(), "x_nm")?;
        let y = parse_f64(f.next(), "y_nm")?;
        let z = parse_f64(f.next(), "z_nm")?;
        positions.push(Point3::new(x, y, z));
    }
    Ok(EmitterSet {
        positions,
        density,
        seed,
    })
}

/// `MFEM`, u32 version, u64 count, f64 density, u64 seed, then little-endian
/// f64 triplets.
pub fn emitters_to_bytes(set: &EmitterSet) -> Vec<u8> {
    let mut b = Vec::with_capacity(28 + 24 * set.len());
    b.extend_from_slice(EMITTER_MAGIC);
    b.extend_from_slice(&1u32.to_le_bytes());
    b.extend_from_slice(&(set.len() as u64).to_le_bytes());
    b.extend_from_slice(&set.density.to_le_bytes());
    b.extend_from_slice(&set.seed.to_le_bytes());
    for p in &set.positions {
        for c in [p.x, p.y, p.z] {
            b.extend_from_slice(&c.to_le_bytes());
        }
    }
    b
}

pub fn emitters_from_bytes(bytes: &[u8]) -> Result<EmitterSet, MeshError> {
    let bad = |m: &str| MeshError::Parse(format!("emitter file: {m}"));
    if bytes.len() < 32 || &bytes[..4] != EMITTER_MAGIC {
        return Err(bad("bad magic"));
    }
    let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let count = u64_at(8) as usize;
    let density = f64::from_bits(u64_at(16));
    let seed = u64_at(24);
    if bytes.len() != 32 + 24 * count {
        return Err(bad("length does not match count"));
    }
    let positions = (0..count)
        .map(|i| {
            let o = 32 + 24 * i;
            Point3::new(
                f64::from_bits(u64_at(o)),
                f64::from_bits(u64_at(o + 8)),
                f64::from_bits(u64_at(o + 16)),
            )
        })
        .collect();
    Ok(EmitterSet {
        positions,
        density,
        seed,
    })
}
