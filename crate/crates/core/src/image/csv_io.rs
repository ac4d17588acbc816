//! Plain-text exchange format: one row per pixel in grid order, headed
//! `x,y[,z],vx,vy,vz` (directional) or `x,y[,z],value` (scalar).
//!
//! Values are printed in shortest round-trip form, so reading a written file
//! reproduces the image exactly.

use std::io::{Read, Write};

use super::{AnyImage, GridShape, Image, ImageError};
use crate::sphere::UnitVector3;

const NORM_TOLERANCE: f64 = 1e-3;
const AXES: [&str; 3] = ["x", "y", "z"];

pub fn write_csv<W: Write>(w: W, img: &AnyImage) -> Result<(), ImageError> {
    let shape = *img.shape();
    let mut out = csv::Writer::from_writer(w);
    let mut header: Vec<&str> = AXES[..shape.ndim()].to_vec();
    match img {
        AnyImage::Scalar(_) => header.push("value"),
        AnyImage::Directional(_) => header.extend(["vx", "vy", "vz"]),
    }
    out.write_record(&header)?;
    let mut row: Vec<String> = Vec::with_capacity(6);
    for i in 0..shape.len() {
        row.clear();
        let pos = shape.position(i);
        row.extend(pos[..shape.ndim()].iter().map(|p| p.to_string()));
        match img {
            AnyImage::Scalar(s) => row.push(s.pixels()[i].to_string()),
            AnyImage::Directional(d) => {
                row.extend(d.pixels()[i].to_array().iter().map(|c| c.to_string()))
            }
        }
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

/// Writes the depth field of `img` about `mu` as a scalar CSV.
pub fn write_depth_csv<W: Write>(
    w: W,
    img: &Image<UnitVector3>,
    mu: &UnitVector3,
) -> Result<(), ImageError> {
    write_csv(w, &AnyImage::Scalar(img.depth_field(mu)))
}

pub fn read_csv<R: Read>(r: R) -> Result<AnyImage, ImageError> {
    let mut rd = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(r);
    let header: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
    let (ndim, directional) = parse_header(&header)?;
    let width = header.len();

    let mut rows: Vec<([usize; 3], [f64; 3])> = Vec::new();
    let mut ext = [1usize; 3];
    for (line, rec) in rd.records().enumerate() {
        let rec = rec?;
        let bad = |what: String| ImageError::Format(format!("row {}: {what}", line + 2));
        if rec.len() != width {
            return Err(bad(format!("expected {width} fields, got {}", rec.len())));
        }
        let mut pos = [0usize; 3];
        for k in 0..ndim {
            pos[k] = rec[k]
                .parse()
                .map_err(|_| bad(format!("bad coordinate {:?}", &rec[k])))?;
            ext[k] = ext[k].max(pos[k].saturating_add(1));
        }
        let mut val = [0.0f64; 3];
        for (k, field) in rec.iter().skip(ndim).enumerate() {
            val[k] = field
                .parse()
                .map_err(|_| bad(format!("bad value {field:?}")))?;
            if !val[k].is_finite() {
                return Err(bad(format!("non-finite value {field:?}")));
            }
        }
        rows.push((pos, val));
    }
    if rows.is_empty() {
        return Err(ImageError::Format("no pixel rows".into()));
    }
    let shape = GridShape::new(&ext[..ndim])?;
    if rows.len() != shape.len() {
        return Err(ImageError::Format(format!(
            "{} rows for a {:?} grid of {} pixels",
            rows.len(),
            shape.dims(),
            shape.len()
        )));
    }
    let mut seen = vec![false; shape.len()];
    let mut slots: Vec<[f64; 3]> = vec![[0.0; 3]; shape.len()];
    for (pos, val) in rows {
        let i = shape.index(pos);
        if std::mem::replace(&mut seen[i], true) {
            return Err(ImageError::Format(format!("pixel {pos:?} listed twice")));
        }
        slots[i] = val;
    }

    if !directional {
        let data = slots.into_iter().map(|v| v[0]).collect();
        return Ok(AnyImage::Scalar(Image::from_vec(shape, data)?));
    }
    let data = slots
        .into_iter()
        .enumerate()
        .map(|(i, v)| {
            let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            if (norm - 1.0).abs() > NORM_TOLERANCE {
                return Err(ImageError::Format(format!(
                    "pixel {:?} is not a unit vector (norm {norm})",
                    shape.position(i)
                )));
            }
            UnitVector3::new(v[0], v[1], v[2])
                .map_err(|e| ImageError::Format(format!("pixel {:?}: {e}", shape.position(i))))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(AnyImage::Directional(Image::from_vec(shape, data)?))
}

fn parse_header(header: &[String]) -> Result<(usize, bool), ImageError> {
    let names: Vec<&str> = header.iter().map(String::as_str).collect();
    for ndim in [2, 3] {
        if names.len() < ndim || names[..ndim] != AXES[..ndim] {
            continue;
        }
        match &names[ndim..] {
            ["value"] => return Ok((ndim, false)),
            ["vx", "vy", "vz"] => return Ok((ndim, true)),
            _ => {}
        }
    }
    Err(ImageError::Format(format!(
        "unrecognised header {:?}",
        names.join(",")
    )))
}
