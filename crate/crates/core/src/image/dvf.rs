//! DVF1: a little-endian container for scalar and directional volumes.
//!
//! ```text
//! magic  "DVF1"            4 bytes
//! kind   u8                0 = scalar, 1 = directional
//! q      u8                2 or 3
//! dims   q × u32           x extent first
//! data   f32 × (n · c)     c = 1 (scalar) or 3 (x, y, z), x-fastest order
//! ```
//!
//! Direction vectors are renormalised on load when their norm is within
//! 1e-3 of one and rejected otherwise. On save each vector is written as an
//! f32 triple that decodes back to itself, so a loaded image saves to the
//! same bytes and reloads to the same bits.

use std::io::{Read, Write};

use super::{AnyImage, GridShape, Image, ImageError};
use crate::sphere::UnitVector3;

pub const DVF_MAGIC: &[u8; 4] = b"DVF1";

const KIND_SCALAR: u8 = 0;
const KIND_DIRECTIONAL: u8 = 1;
const NORM_TOLERANCE: f64 = 1e-3;

pub fn write_dvf<W: Write>(w: &mut W, img: &AnyImage) -> Result<(), ImageError> {
    let shape = img.shape();
    w.write_all(DVF_MAGIC)?;
    let kind = match img {
        AnyImage::Scalar(_) => KIND_SCALAR,
        AnyImage::Directional(_) => KIND_DIRECTIONAL,
    };
    w.write_all(&[kind, shape.ndim() as u8])?;
    for &d in shape.dims() {
        let d = u32::try_from(d)
            .map_err(|_| ImageError::InvalidShape(format!("extent {d} exceeds u32")))?;
        w.write_all(&d.to_le_bytes())?;
    }
    match img {
        AnyImage::Scalar(s) => {
            let mut buf = Vec::with_capacity(4 * s.pixels().len());
            for &v in s.pixels() {
                buf.extend_from_slice(&(v as f32).to_le_bytes());
            }
            w.write_all(&buf)?;
        }
        AnyImage::Directional(d) => {
            let mut buf = Vec::with_capacity(12 * d.pixels().len());
            for v in d.pixels() {
                for c in snap_to_f32(v) {
                    buf.extend_from_slice(&c.to_le_bytes());
                }
            }
            w.write_all(&buf)?;
        }
    }
    Ok(())
}

pub fn read_dvf<R: Read>(mut r: R) -> Result<AnyImage, ImageError> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    let fmt = |m: &str| ImageError::Format(m.to_string());
    if bytes.len() < 6 || &bytes[..4] != DVF_MAGIC {
        return Err(fmt("bad magic, expected \"DVF1\""));
    }
    let kind = bytes[4];
    if kind != KIND_SCALAR && kind != KIND_DIRECTIONAL {
        return Err(ImageError::Format(format!("unknown pixel kind {kind}")));
    }
    let q = bytes[5] as usize;
    if q != 2 && q != 3 {
        return Err(ImageError::Format(format!("unsupported dimension {q}")));
    }
    let header = 6 + 4 * q;
    if bytes.len() < header {
        return Err(fmt("truncated header"));
    }
    let dims: Vec<usize> = bytes[6..header]
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes(c.try_into().unwrap()) as usize)
        .collect();
    let shape = GridShape::new(&dims)?;
    let channels = if kind == KIND_SCALAR { 1 } else { 3 };
    let expected = shape
        .len()
        .checked_mul(4 * channels)
        .and_then(|n| n.checked_add(header));
    if expected != Some(bytes.len()) {
        return Err(ImageError::Format(format!(
            "payload is {} bytes, header implies {}",
            bytes.len() - header,
            4 * channels * shape.len()
        )));
    }
    let values = bytes[header..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()));
    if kind == KIND_SCALAR {
        let data: Vec<f64> = values.map(f64::from).collect();
        return Ok(AnyImage::Scalar(Image::from_vec(shape, data)?));
    }
    let raw: Vec<f32> = values.collect();
    let data = raw
        .chunks_exact(3)
        .enumerate()
        .map(|(i, c)| {
            decode([c[0], c[1], c[2]]).ok_or_else(|| {
                ImageError::Format(format!(
                    "pixel {:?} is not a unit vector: ({}, {}, {})",
                    shape.position(i),
                    c[0],
                    c[1],
                    c[2]
                ))
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(AnyImage::Directional(Image::from_vec(shape, data)?))
}

fn decode(c: [f32; 3]) -> Option<UnitVector3> {
    let v = c.map(f64::from);
    if !v.iter().all(|x| x.is_finite()) {
        return None;
    }
    let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    if (norm - 1.0).abs() > NORM_TOLERANCE {
        return None;
    }
    UnitVector3::new(v[0], v[1], v[2]).ok()
}

fn narrow(v: &UnitVector3) -> [f32; 3] {
    [v.x() as f32, v.y() as f32, v.z() as f32]
}

fn is_fixpoint(c: [f32; 3]) -> bool {
    decode(c).is_some_and(|u| narrow(&u) == c)
}

// The f32 triple nearest to `v` among those that decode to a vector which
// narrows back to the same triple.
fn snap_to_f32(v: &UnitVector3) -> [f32; 3] {
    let base = narrow(v);
    if is_fixpoint(base) {
        return base;
    }
    let target = v.to_array();
    let step = |x: f32, d: i32| match d {
        -1 => x.next_down(),
        1 => x.next_up(),
        _ => x,
    };
    let mut best: Option<([f32; 3], f64)> = None;
    for dx in -1..=1 {
        for dy in -1..=1 {
            for dz in -1..=1 {
                let c = [step(base[0], dx), step(base[1], dy), step(base[2], dz)];
                if !is_fixpoint(c) {
                    continue;
                }
                let err: f64 = (0..3).map(|k| (f64::from(c[k]) - target[k]).powi(2)).sum();
                if best.is_none_or(|(_, e)| err < e) {
                    best = Some((c, err));
                }
            }
        }
    }
    best.map_or(base, |(c, _)| c)
}
