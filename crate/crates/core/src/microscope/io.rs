//! Counts as 16-bit binary PGM, masks as 8-bit PGM (0/255), noise-free
//! images as little-endian f32 raw with a JSON header next to them.

use super::{Image, ImageStack, Mask, MicroscopeError};
use serde::{Deserialize, Serialize};
use std::path::Path;

fn pgm_header(width: usize, height: usize, maxval: u32) -> Vec<u8> {
    format!("P5\n{width} {height}\n{maxval}\n").into_bytes()
}

pub fn write_pgm16(image: &Image, path: &Path) -> Result<(), MicroscopeError> {
    let mut b = pgm_header(image.width, image.height, 65535);
    b.reserve(2 * image.pixels.len());
    for &v in &image.pixels {
        if !(0.0..=65535.0).contains(&v) {
            return Err(MicroscopeError::CountOverflow(v));
        }
        b.extend_from_slice(&(v.round() as u16).to_be_bytes());
    }
    std::fs::write(path, b)?;
    Ok(())
}

pub fn write_mask_pgm(mask: &Mask, path: &Path) -> Result<(), MicroscopeError> {
    let mut b = pgm_header(mask.width, mask.height, 255);
    b.extend(mask.data.iter().map(|&v| if v != 0 { 255u8 } else { 0 }));
    std::fs::write(path, b)?;
    Ok(())
}

/// Parses a binary PGM header; returns (width, height, maxval, data offset).
fn parse_pgm(bytes: &[u8]) -> Result<(usize, usize, u32, usize), MicroscopeError> {
    let bad = |m: &str| MicroscopeError::Malformed(m.to_string());
    if !bytes.starts_with(b"P5") {
        return Err(bad("not a binary PGM"));
    }
    let mut fields = Vec::with_capacity(3);
    let mut i = 2;
    while fields.len() < 3 {
        while i < bytes.len() && (bytes[i].is_ascii_whitespace() || bytes[i] == b'#') {
            if bytes[i] == b'#' {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
            } else {
                i += 1;
            }
        }
        let start = i;
        while i < bytes.len() && bytes[i].is_ascii_digit() {
            i += 1;
        }
        if start == i {
            return Err(bad("truncated PGM header"));
        }
        let s = std::str::from_utf8(&bytes[start..i]).unwrap();
        fields.push(s.parse::<u64>().map_err(|_| bad("bad PGM header number"))?);
    }
    if i >= bytes.len() || !bytes[i].is_ascii_whitespace() {
        return Err(bad("missing separator after PGM header"));
    }
    let maxval = fields[2];
    if maxval == 0 || maxval > 65535 {
        return Err(bad("PGM maxval out of range"));
    }
    Ok((fields[0] as usize, fields[1] as usize, maxval as u32, i + 1))
}

pub fn read_pgm16(path: &Path) -> Result<Image, MicroscopeError> {
    let bytes = std::fs::read(path)?;
    let (w, h, maxval, off) = parse_pgm(&bytes)?;
    let n = w * h;
    let pixels: Vec<f64> = if maxval > 255 {
        if bytes.len() != off + 2 * n {
            return Err(MicroscopeError::Malformed("PGM data length mismatch".into()));
        }
        bytes[off..].chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]]) as f64).collect()
    } else {
        if bytes.len() != off + n {
            return Err(MicroscopeError::Malformed("PGM data length mismatch".into()));
        }
        bytes[off..].iter().map(|&v| v as f64).collect()
    };
    Ok(Image {
        width: w,
        height: h,
        pixels,
    })
}

pub fn read_pgm8(path: &Path) -> Result<Mask, MicroscopeError> {
    let img = read_pgm16(path)?;
    Ok(Mask {
        width: img.width,
        height: img.height,
        data: img.pixels.iter().map(|&v| (v > 0.0) as u8).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawImageHeader {
    pub width: usize,
    pub height: usize,
    pub dtype: String,
    pub pixel_size_nm: f64,
    pub z_offset_nm: f64,
}

fn raw_header_path(path: &Path) -> std::path::PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    s.into()
}

pub fn write_f32_raw(image: &Image, pixel_size_nm: f64, z_offset_nm: f64, path: &Path) -> Result<(), MicroscopeError> {
    let header = RawImageHeader {
        width: image.width,
        height: image.height,
        dtype: "f32le".into(),
        pixel_size_nm,
        z_offset_nm,
    };
    let b: Vec<u8> = image.pixels.iter().flat_map(|&v| (v as f32).to_le_bytes()).collect();
    std::fs::write(path, b)?;
    std::fs::write(raw_header_path(path), serde_json::to_string_pretty(&header)?)?;
    Ok(())
}

pub fn read_f32_raw(path: &Path) -> Result<(Image, RawImageHeader), MicroscopeError> {
    let header: RawImageHeader = serde_json::from_str(&std::fs::read_to_string(raw_header_path(path))?)?;
    if header.dtype != "f32le" {
        return Err(MicroscopeError::Malformed(format!("unsupported dtype {}", header.dtype)));
    }
    let bytes = std::fs::read(path)?;
    if bytes.len() != 4 * header.width * header.height {
        return Err(MicroscopeError::Malformed("raw length does not match header".into()));
    }
    let pixels = bytes.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64).collect();
    Ok((
        Image {
            width: header.width,
            height: header.height,
            pixels,
        },
        header,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StackManifest {
    pub width: usize,
    pub height: usize,
    pub pixel_size_nm: f64,
    pub z_offsets_nm: Vec<f64>,
    pub noisy: bool,
    pub seed: Option<u64>,
    pub files: Vec<String>,
}

/// One file per slice (`{stem}_z{k}.pgm` for counts, `.f32` otherwise)
/// plus `{stem}.json`. Returns the paths written, manifest last.
pub fn write_stack(stack: &ImageStack, dir: &Path, stem: &str) -> Result<Vec<std::path::PathBuf>, MicroscopeError> {
    let mut written = Vec::new();
    let mut files = Vec::new();
    for (k, (slice, &z)) in stack.slices.iter().zip(&stack.z_offsets_nm).enumerate() {
        let name = if stack.noisy {
            format!("{stem}_z{k}.pgm")
        } else {
            format!("{stem}_z{k}.f32")
        };
        let p = dir.join(&name);
        if stack.noisy {
            write_pgm16(slice, &p)?;
        } else {
            write_f32_raw(slice, stack.pixel_size_nm, z, &p)?;
            written.push(raw_header_path(&p));
        }
        written.push(p);
        files.push(name);
    }
    let manifest = StackManifest {
        width: stack.width,
        height: stack.height,
        pixel_size_nm: stack.pixel_size_nm,
        z_offsets_nm: stack.z_offsets_nm.clone(),
        noisy: stack.noisy,
        seed: stack.seed,
        files,
    };
    let mp = dir.join(format!("{stem}.json"));
    std::fs::write(&mp, serde_json::to_string_pretty(&manifest)?)?;
    written.push(mp);
    Ok(written)
}

pub fn read_stack(manifest_path: &Path) -> Result<ImageStack, MicroscopeError> {
    let m: StackManifest = serde_json::from_str(&std::fs::read_to_string(manifest_path)?)?;
    if m.files.len() != m.z_offsets_nm.len() {
        return Err(MicroscopeError::Malformed("file count differs from offset count".into()));
    }
    let dir = manifest_path.parent().unwrap_or(Path::new("."));
    let mut slices = Vec::new();
    for f in &m.files {
        let img = if m.noisy {
            read_pgm16(&dir.join(f))?
        } else {
            read_f32_raw(&dir.join(f))?.0
        };
        if img.width != m.width || img.height != m.height {
            return Err(MicroscopeError::Malformed(format!("{f} has the wrong size")));
        }
        slices.push(img);
    }
    Ok(ImageStack {
        width: m.width,
        height: m.height,
        pixel_size_nm: m.pixel_size_nm,
        z_offsets_nm: m.z_offsets_nm,
        slices,
        noisy: m.noisy,
        seed: m.seed,
    })
}
