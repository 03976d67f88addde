//! Binary sample format, all little endian:
//!
//! ```text
//! magic "MFOC" | version u16 | reserved u16 | count u64 | seed u64
//! | source length u32 | source bytes (UTF-8)
//! | count x (x f32, y f32, z f32, label u8)
//! | SHA-256 of everything above (32 bytes)
//! ```

use super::{OccupancyError, OccupancySampleSet};
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::path::Path;

const MAGIC: &[u8; 4] = b"MFOC";
const VERSION: u16 = 1;
const RECORD: usize = 13;
const FIXED_HEADER: usize = 4 + 2 + 2 + 8 + 8 + 4;

pub fn to_bytes(set: &OccupancySampleSet) -> Vec<u8> {
    let src = set.source.as_bytes();
    let mut b = Vec::with_capacity(FIXED_HEADER + src.len() + RECORD * set.len() + 32);
    b.extend_from_slice(MAGIC);
    b.extend_from_slice(&VERSION.to_le_bytes());
    b.extend_from_slice(&0u16.to_le_bytes());
    b.extend_from_slice(&(set.len() as u64).to_le_bytes());
    b.extend_from_slice(&set.seed.to_le_bytes());
    b.extend_from_slice(&(src.len() as u32).to_le_bytes());
    b.extend_from_slice(src);
    for (p, &l) in set.points.iter().zip(&set.labels) {
        for c in p {
            b.extend_from_slice(&c.to_le_bytes());
        }
        b.push(l);
    }
    let digest = Sha256::digest(&b);
    b.extend_from_slice(&digest);
    b
}

pub fn from_bytes(bytes: &[u8]) -> Result<OccupancySampleSet, OccupancyError> {
    let bad = |m: &str| OccupancyError::Malformed(m.to_string());
    if bytes.len() < FIXED_HEADER + 32 {
        return Err(bad("truncated header"));
    }
    if &bytes[..4] != MAGIC {
        return Err(bad("bad magic"));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != VERSION {
        return Err(OccupancyError::Malformed(format!("unsupported version {version}")));
    }
    let count = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
    let seed = u64::from_le_bytes(bytes[16..24].try_into().unwrap());
    let src_len = u32::from_le_bytes(bytes[24..28].try_into().unwrap()) as usize;
    let body_len = (count as usize)
        .checked_mul(RECORD)
        .and_then(|r| r.checked_add(FIXED_HEADER + src_len))
        .ok_or_else(|| bad("count overflows"))?;
    if bytes.len() != body_len + 32 {
        return Err(bad("length does not match header"));
    }
    if Sha256::digest(&bytes[..body_len]).as_slice() != &bytes[body_len..] {
        return Err(OccupancyError::ChecksumMismatch);
    }
    let source = std::str::from_utf8(&bytes[FIXED_HEADER..FIXED_HEADER + src_len])
        .map_err(|_| bad("source is not UTF-8"))?
        .to_string();
    let mut points = Vec::with_capacity(count as usize);
    let mut labels = Vec::with_capacity(count as usize);
    for rec in bytes[FIXED_HEADER + src_len..body_len].chunks_exact(RECORD) {
        let f = |o: usize| f32::from_le_bytes(rec[o..o + 4].try_into().unwrap());
        points.push([f(0), f(4), f(8)]);
        if rec[12] > 1 {
            return Err(bad("label is not 0 or 1"));
        }
        labels.push(rec[12]);
    }
    Ok(OccupancySampleSet {
        points,
        labels,
        source,
        seed,
    })
}

pub fn write_samples(set: &OccupancySampleSet, path: &Path) -> Result<(), OccupancyError> {
    std::fs::write(path, to_bytes(set))?;
    Ok(())
}

pub fn read_samples(path: &Path) -> Result<OccupancySampleSet, OccupancyError> {
    from_bytes(&std::fs::read(path)?)
}

/// `x,y,z,label` rows for inspection.
pub fn to_csv(set: &OccupancySampleSet) -> String {
    let mut s = String::from("x,y,z,label\n");
    for (p, l) in set.points.iter().zip(&set.labels) {
        writeln!(s, "{:?},{:?},{:?},{}", p[0], p[1], p[2], l).unwrap();
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::checksum::sha256_file;
    use crate::geometry::Point3;
    use crate::mesh::primitives::icosphere;
    use crate::occupancy::sample_occupancy;

    fn set() -> OccupancySampleSet {
        sample_occupancy(&icosphere(Point3::origin(), 0.4, 2), 300, 8, "icosphere r=0.4").unwrap()
    }

    #[test]
    fn write_read_equal() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.mfoc");
        let s = set();
        write_samples(&s, &p).unwrap();
        assert_eq!(read_samples(&p).unwrap(), s);
    }

    #[test]
    fn truncated_and_corrupted_files_fail() {
        let b = to_bytes(&set());
        for cut in [0, 10, 40, b.len() - 33, b.len() - 1] {
            assert!(from_bytes(&b[..cut]).is_err(), "cut {cut}");
        }
        let mut flipped = b.clone();
        flipped[40] ^= 1;
        assert!(matches!(from_bytes(&flipped), Err(OccupancyError::ChecksumMismatch)));
    }

    #[test]
    fn byte_stable_across_writes() {
        let dir = tempfile::tempdir().unwrap();
        let (a, b) = (dir.path().join("a"), dir.path().join("b"));
        write_samples(&set(), &a).unwrap();
        write_samples(&set(), &b).unwrap();
        assert_eq!(sha256_file(&a).unwrap(), sha256_file(&b).unwrap());
    }

    #[test]
    fn csv_export() {
        let csv = to_csv(&set());
        assert_eq!(csv.lines().count(), 301);
        assert!(csv.starts_with("x,y,z,label\n"));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn bit_exact_round_trip(
                pts in proptest::collection::vec((any::<f32>(), any::<f32>(), any::<f32>(), 0u8..2), 0..64),
                seed in any::<u64>(),
                source in ".{0,20}",
            ) {
                let s = OccupancySampleSet {
                    points: pts.iter().map(|p| [p.0, p.1, p.2]).collect(),
                    labels: pts.iter().map(|p| p.3).collect(),
                    source,
                    seed,
                };
                let back = from_bytes(&to_bytes(&s)).unwrap();
                let bits = |v: &OccupancySampleSet| v.points.iter().flatten().map(|c| c.to_bits()).collect::<Vec<_>>();
                prop_assert_eq!(bits(&back), bits(&s));
                prop_assert_eq!(back.labels, s.labels);
                prop_assert_eq!(back.source, s.source);
                prop_assert_eq!(back.seed, s.seed);
            }
        }
    }
}
