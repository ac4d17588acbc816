//! Flat morphology of directional images.
//!
//! Erosion picks, in every window, the pixel of least depth about `mu` (the
//! most outlying direction); dilation picks the deepest one. Candidates are
//! ranked by their exact depth value first, and the longitude rule of
//! [`DepthOrdering`] only separates candidates whose depths are bitwise
//! equal. The depth of the selected pixel is therefore always the exact
//! scalar window extremum of the depth field.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::image::{DirectionalImage, Image, OffsetTable, ScalarImage, StructuringElement};
use crate::sphere::{depth_value, DepthOrdering, UnitVector3};

#[derive(Clone, Debug, PartialEq)]
pub struct MorphParams {
    pub mu: UnitVector3,
    pub se: StructuringElement,
}

impl MorphParams {
    pub fn new(mu: UnitVector3, se: StructuringElement) -> Self {
        Self { mu, se }
    }
}

/// Which operator the shock filter applies where the Laplacian is negative.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ShockConvention {
    /// Erode where Δ < 0, dilate where Δ > 0.
    #[default]
    Paper,
    /// Dilate where Δ < 0 (near local maxima), erode where Δ > 0.
    Classical,
}

impl FromStr for ShockConvention {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "paper" => Ok(Self::Paper),
            "classical" => Ok(Self::Classical),
            _ => Err(format!("unknown shock convention {s:?} (paper|classical)")),
        }
    }
}

impl fmt::Display for ShockConvention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Paper => "paper",
            Self::Classical => "classical",
        })
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
pub(crate) enum Pick {
    Least,
    Greatest,
}

/// Ranks `a` against `b` by exact depth, then by the longitude rule.
#[inline]
pub(crate) fn rank(
    ord: &DepthOrdering,
    da: f64,
    a: &UnitVector3,
    db: f64,
    b: &UnitVector3,
) -> Ordering {
    da.total_cmp(&db).then_with(|| ord.tie_cmp(a, b))
}

// Index of the selected pixel for every output position.
fn select(img: &DirectionalImage, depth: &[f64], p: &MorphParams, pick: Pick) -> Vec<usize> {
    let shape = *img.shape();
    let ord = DepthOrdering::new(p.mu);
    let table = OffsetTable::new(shape, p.se.offsets().to_vec());
    let px = img.pixels();
    let want = match pick {
        Pick::Least => Ordering::Less,
        Pick::Greatest => Ordering::Greater,
    };
    (0..shape.len())
        .into_par_iter()
        .map(|i| {
            let mut best = i;
            table.visit(i, |_, j| {
                if j != best && rank(&ord, depth[j], &px[j], depth[best], &px[best]) == want {
                    best = j;
                }
            });
            best
        })
        .collect()
}

fn gather(img: &DirectionalImage, idx: &[usize]) -> DirectionalImage {
    let px = img.pixels();
    Image::from_vec(*img.shape(), idx.iter().map(|&j| px[j]).collect())
        .expect("selection preserves the pixel count")
}

fn depths(img: &DirectionalImage, mu: &UnitVector3) -> Vec<f64> {
    img.pixels()
        .par_iter()
        .map(|v| depth_value(v, mu))
        .collect()
}

pub fn erode(img: &DirectionalImage, p: &MorphParams) -> DirectionalImage {
    gather(img, &select(img, &depths(img, &p.mu), p, Pick::Least))
}

pub fn dilate(img: &DirectionalImage, p: &MorphParams) -> DirectionalImage {
    gather(img, &select(img, &depths(img, &p.mu), p, Pick::Greatest))
}

pub fn open(img: &DirectionalImage, p: &MorphParams) -> DirectionalImage {
    dilate(&erode(img, p), p)
}

pub fn close(img: &DirectionalImage, p: &MorphParams) -> DirectionalImage {
    erode(&dilate(img, p), p)
}

/// `D(dilate) − D(erode)`, in `[0, 1]`.
pub fn gradient(img: &DirectionalImage, p: &MorphParams) -> ScalarImage {
    let d = depths(img, &p.mu);
    let lo = select(img, &d, p, Pick::Least);
    let hi = select(img, &d, p, Pick::Greatest);
    scalar(
        img,
        hi.iter().zip(&lo).map(|(&h, &l)| d[h] - d[l]).collect(),
    )
}

/// `(D(dilate) − D) − (D − D(erode))`, in `[−1, 1]`.
pub fn laplacian(img: &DirectionalImage, p: &MorphParams) -> ScalarImage {
    let d = depths(img, &p.mu);
    let lo = select(img, &d, p, Pick::Least);
    let hi = select(img, &d, p, Pick::Greatest);
    scalar(img, laplace_values(&d, &lo, &hi))
}

fn laplace_values(d: &[f64], lo: &[usize], hi: &[usize]) -> Vec<f64> {
    (0..d.len())
        .map(|i| (d[hi[i]] - d[i]) - (d[i] - d[lo[i]]))
        .collect()
}

fn scalar(img: &DirectionalImage, values: Vec<f64>) -> ScalarImage {
    ScalarImage::from_vec(*img.shape(), values).expect("one value per pixel")
}

/// Replaces each pixel by its erosion or dilation according to the sign of
/// the Laplacian; pixels with a Laplacian of exactly zero are kept.
pub fn shock(
    img: &DirectionalImage,
    p: &MorphParams,
    convention: ShockConvention,
) -> DirectionalImage {
    let d = depths(img, &p.mu);
    let lo = select(img, &d, p, Pick::Least);
    let hi = select(img, &d, p, Pick::Greatest);
    let lap = laplace_values(&d, &lo, &hi);
    let px = img.pixels();
    let out = (0..px.len())
        .map(|i| shock_pick(lap[i], convention, px[i], px[lo[i]], px[hi[i]]))
        .collect();
    Image::from_vec(*img.shape(), out).expect("one vector per pixel")
}

pub(crate) fn shock_pick(
    lap: f64,
    convention: ShockConvention,
    keep: UnitVector3,
    eroded: UnitVector3,
    dilated: UnitVector3,
) -> UnitVector3 {
    let (neg, pos) = match convention {
        ShockConvention::Paper => (eroded, dilated),
        ShockConvention::Classical => (dilated, eroded),
    };
    if lap < 0.0 {
        neg
    } else if lap > 0.0 {
        pos
    } else {
        keep
    }
}
