//! Pseudo-morphological multi-scale operators.
//!
//! The structuring function at scale `t` rotates a neighbour at offset `o`
//! along its great circle through `mu` by `α_t(o) = min(‖o‖²/t, π)`: toward
//! `mu` for erosion, away from it for dilation. The erosion at a pixel is
//! the rotated neighbour of least depth over the whole domain, the dilation
//! the deepest one.
//!
//! Offsets with `‖o‖² ≥ πt` rotate every vector all the way to `mu` (or
//! `-mu`), so only the ball of radius `ceil(sqrt(πt))` is scanned pixel by
//! pixel; the rest of the domain contributes a single candidate, `mu` or
//! `-mu`, which is considered whenever the domain reaches beyond the ball.

use std::cmp::Ordering;
use std::f64::consts::PI;

use rayon::prelude::*;
use thiserror::Error;

use crate::flat_morph::{shock_pick, Pick, ShockConvention};
use crate::image::{DirectionalImage, GridShape, Image, ScalarImage};
use crate::sphere::{depth_value, DepthOrdering, GreatCircle, UnitVector3};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScaleError {
    #[error("scale must be positive and finite, got {0}")]
    InvalidScale(f64),
    #[error("grid step must be positive and finite, got {0}")]
    InvalidStep(f64),
}

fn check_scale(t: f64) -> Result<(), ScaleError> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(ScaleError::InvalidScale(t))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScaleParams {
    mu: UnitVector3,
    t: f64,
}

impl ScaleParams {
    pub fn new(mu: UnitVector3, t: f64) -> Result<Self, ScaleError> {
        check_scale(t)?;
        Ok(Self { mu, t })
    }

    pub fn mu(&self) -> &UnitVector3 {
        &self.mu
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    /// `ceil(sqrt(πt))`; every offset at least this long has `α_t = π`.
    pub fn support_radius(&self) -> usize {
        (PI * self.t).sqrt().ceil() as usize
    }

    #[inline]
    fn alpha_sq(&self, norm_sq: f64) -> f64 {
        (norm_sq / self.t).min(PI)
    }
}

fn norm_sq(offset: &[f64]) -> f64 {
    offset.iter().map(|o| o * o).sum()
}

/// `min(‖offset‖²/t, π)`.
pub fn alpha(offset: &[f64], t: f64) -> Result<f64, ScaleError> {
    check_scale(t)?;
    Ok((norm_sq(offset) / t).min(PI))
}

/// `x` rotated toward `mu` by `α_t(offset)`, stopping at `mu`.
pub fn minus_bt(x: &UnitVector3, offset: &[f64], sp: &ScaleParams) -> UnitVector3 {
    GreatCircle::new(x, &sp.mu).toward(sp.alpha_sq(norm_sq(offset)))
}

/// `x` rotated away from `mu` by `α_t(offset)`, stopping at `-mu`.
pub fn plus_bt(x: &UnitVector3, offset: &[f64], sp: &ScaleParams) -> UnitVector3 {
    GreatCircle::new(x, &sp.mu).away(sp.alpha_sq(norm_sq(offset)))
}

struct Candidate {
    depth: f64,
    norm_sq: i64,
    v: UnitVector3,
}

// Integer offsets within the support ball that fit in the grid, nearest first.
fn ball(shape: &GridShape, radius: usize) -> Vec<([i32; 3], i64)> {
    let ext = shape.extents();
    let r2 = (radius * radius) as i64;
    let reach = |k: usize| radius.min(ext[k] - 1) as i32;
    let (rx, ry, rz) = (reach(0), reach(1), reach(2));
    let mut out = Vec::new();
    for z in -rz..=rz {
        for y in -ry..=ry {
            for x in -rx..=rx {
                let n = (x * x + y * y + z * z) as i64;
                if n <= r2 {
                    out.push(([x, y, z], n));
                }
            }
        }
    }
    out.sort_by_key(|&(o, n)| (n, o[2], o[1], o[0]));
    out
}

fn farthest_sq(shape: &GridShape, pos: [usize; 3]) -> i64 {
    let ext = shape.extents();
    (0..3)
        .map(|k| {
            let d = pos[k].max(ext[k] - 1 - pos[k]) as i64;
            d * d
        })
        .sum()
}

fn ms_select(img: &DirectionalImage, sp: &ScaleParams, pick: Pick) -> Vec<Candidate> {
    let shape = *img.shape();
    let ord = DepthOrdering::new(sp.mu);
    let radius = sp.support_radius();
    let offsets = ball(&shape, radius);
    let alphas: Vec<f64> = offsets
        .iter()
        .map(|&(_, n)| sp.alpha_sq(n as f64))
        .collect();
    let circles: Vec<GreatCircle> = img
        .pixels()
        .par_iter()
        .map(|v| GreatCircle::new(v, &sp.mu))
        .collect();
    let (want, pole) = match pick {
        Pick::Least => (Ordering::Less, sp.mu),
        Pick::Greatest => (Ordering::Greater, -sp.mu),
    };
    let pole_depth = depth_value(&pole, &sp.mu);
    let r2 = (radius * radius) as i64;
    let px = img.pixels();

    (0..shape.len())
        .into_par_iter()
        .map(|i| {
            let pos = shape.position(i);
            let mut best = Candidate {
                depth: depth_value(&px[i], &sp.mu),
                norm_sq: 0,
                v: px[i],
            };
            for (&(o, n), &a) in offsets.iter().zip(&alphas).skip(1) {
                let Some(q) = shape.shift(pos, o) else {
                    continue;
                };
                let gc = &circles[shape.index(q)];
                let v = match pick {
                    Pick::Least => gc.toward(a),
                    Pick::Greatest => gc.away(a),
                };
                let d = depth_value(&v, &sp.mu);
                let c = d
                    .total_cmp(&best.depth)
                    .then(best.norm_sq.cmp(&n))
                    .then_with(|| ord.tie_cmp(&v, &best.v));
                if c == want {
                    best = Candidate {
                        depth: d,
                        norm_sq: n,
                        v,
                    };
                }
            }
            // Beyond the ball every candidate is the pole, which can only win
            // on strictly better depth since it lies farther than any other.
            if farthest_sq(&shape, pos) > r2 && pole_depth.total_cmp(&best.depth) == want {
                best = Candidate {
                    depth: pole_depth,
                    norm_sq: r2 + 1,
                    v: pole,
                };
            }
            best
        })
        .collect()
}

fn vectors(shape: GridShape, c: &[Candidate]) -> DirectionalImage {
    Image::from_vec(shape, c.iter().map(|c| c.v).collect()).expect("one vector per pixel")
}

pub fn ms_erode(img: &DirectionalImage, sp: &ScaleParams) -> DirectionalImage {
    vectors(*img.shape(), &ms_select(img, sp, Pick::Least))
}

pub fn ms_dilate(img: &DirectionalImage, sp: &ScaleParams) -> DirectionalImage {
    vectors(*img.shape(), &ms_select(img, sp, Pick::Greatest))
}

pub fn ms_open(img: &DirectionalImage, sp: &ScaleParams) -> DirectionalImage {
    ms_dilate(&ms_erode(img, sp), sp)
}

pub fn ms_close(img: &DirectionalImage, sp: &ScaleParams) -> DirectionalImage {
    ms_erode(&ms_dilate(img, sp), sp)
}

/// `D(ms_dilate) − D(ms_erode)`.
pub fn ms_gradient(img: &DirectionalImage, sp: &ScaleParams) -> ScalarImage {
    let lo = ms_select(img, sp, Pick::Least);
    let hi = ms_select(img, sp, Pick::Greatest);
    let g = hi.iter().zip(&lo).map(|(h, l)| h.depth - l.depth).collect();
    ScalarImage::from_vec(*img.shape(), g).expect("one value per pixel")
}

/// Shock filter with the multi-scale erosion and dilation in place of the
/// flat ones.
pub fn ms_shock(
    img: &DirectionalImage,
    sp: &ScaleParams,
    convention: ShockConvention,
) -> DirectionalImage {
    let lo = ms_select(img, sp, Pick::Least);
    let hi = ms_select(img, sp, Pick::Greatest);
    let out = img
        .pixels()
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let d = depth_value(x, &sp.mu);
            let lap = (hi[i].depth - d) - (d - lo[i].depth);
            shock_pick(lap, convention, *x, lo[i].v, hi[i].v)
        })
        .collect();
    Image::from_vec(*img.shape(), out).expect("one vector per pixel")
}

/// Lattice pitch used when none is given: a thousandth of `‖offset‖`.
pub fn default_grid_step(offset: &[f64]) -> f64 {
    let n = norm_sq(offset).sqrt();
    if n > 0.0 {
        1e-3 * n
    } else {
        1e-3
    }
}

/// `inf_j α_t(offset − j) + α_s(j)`, searched over the lattice
/// `grid_step · Zᵈ` inside the ball with diameter `[0, offset]` (where any
/// minimiser lies), plus the endpoints `j = 0` and `j = offset`.
pub fn alpha_infimal_convolution(
    t: f64,
    s: f64,
    offset: &[f64],
    grid_step: f64,
) -> Result<f64, ScaleError> {
    check_scale(t)?;
    check_scale(s)?;
    if !(grid_step > 0.0 && grid_step.is_finite()) {
        return Err(ScaleError::InvalidStep(grid_step));
    }
    let dim = offset.len();
    let cost = |j: &[f64]| {
        let rest: Vec<f64> = offset.iter().zip(j).map(|(o, j)| o - j).collect();
        (norm_sq(&rest) / t).min(PI) + (norm_sq(j) / s).min(PI)
    };
    let zero = vec![0.0; dim];
    let mut best = cost(&zero).min(cost(offset));
    let centre: Vec<f64> = offset.iter().map(|o| 0.5 * o).collect();
    let radius = 0.5 * norm_sq(offset).sqrt() + grid_step;
    let lo: Vec<i64> = centre
        .iter()
        .map(|c| ((c - radius) / grid_step).floor() as i64)
        .collect();
    let hi: Vec<i64> = centre
        .iter()
        .map(|c| ((c + radius) / grid_step).ceil() as i64)
        .collect();
    let mut idx = lo.clone();
    let mut j = vec![0.0; dim];
    'outer: loop {
        for k in 0..dim {
            j[k] = idx[k] as f64 * grid_step;
        }
        let from_centre: f64 = j.iter().zip(&centre).map(|(a, c)| (a - c) * (a - c)).sum();
        if from_centre <= radius * radius {
            best = best.min(cost(&j));
        }
        for k in 0..dim {
            if idx[k] < hi[k] {
                idx[k] += 1;
                continue 'outer;
            }
            idx[k] = lo[k];
        }
        break;
    }
    Ok(best)
}

/// The infimal convolution evaluated at the closed-form minimiser
/// `j* = s/(t+s) · offset`.
pub fn alpha_infimal_convolution_analytic(
    t: f64,
    s: f64,
    offset: &[f64],
) -> Result<f64, ScaleError> {
    check_scale(t)?;
    check_scale(s)?;
    let w = s / (t + s);
    let j: Vec<f64> = offset.iter().map(|o| w * o).collect();
    let rest: Vec<f64> = offset.iter().zip(&j).map(|(o, j)| o - j).collect();
    Ok(alpha(&rest, t)? + alpha(&j, s)?)
}
