//! Flat grey-scale morphology: windowed minima and maxima of a scalar image.
//!
//! Box elements are handled separably with the van Herk/Gil–Werman running
//! extremum (three comparisons per pixel and axis, whatever the box size);
//! other elements fall back to a direct window scan. Both paths give
//! identical results since they only compare values.

use rayon::prelude::*;

use crate::image::{GridShape, OffsetTable, ScalarImage, StructuringElement};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Extremum {
    Min,
    Max,
}

impl Extremum {
    #[inline]
    fn pick(self, a: f64, b: f64) -> f64 {
        match self {
            Extremum::Min => a.min(b),
            Extremum::Max => a.max(b),
        }
    }

    fn neutral(self) -> f64 {
        match self {
            Extremum::Min => f64::INFINITY,
            Extremum::Max => f64::NEG_INFINITY,
        }
    }
}

/// Windowed minimum over `se`, restricted to the image domain.
pub fn scalar_erode(img: &ScalarImage, se: &StructuringElement) -> ScalarImage {
    filter(img, se, Extremum::Min)
}

/// Windowed maximum over `se`, restricted to the image domain.
pub fn scalar_dilate(img: &ScalarImage, se: &StructuringElement) -> ScalarImage {
    filter(img, se, Extremum::Max)
}

pub fn scalar_open(img: &ScalarImage, se: &StructuringElement) -> ScalarImage {
    scalar_dilate(&scalar_erode(img, se), se)
}

pub fn scalar_close(img: &ScalarImage, se: &StructuringElement) -> ScalarImage {
    scalar_erode(&scalar_dilate(img, se), se)
}

fn filter(img: &ScalarImage, se: &StructuringElement, op: Extremum) -> ScalarImage {
    let shape = *img.shape();
    let data = match se.box_radii() {
        Some(radii) => separable(img.pixels(), &shape, radii, op),
        None => direct(img.pixels(), &shape, se, op),
    };
    ScalarImage::from_vec(shape, data).expect("filter preserves the pixel count")
}

fn direct(data: &[f64], shape: &GridShape, se: &StructuringElement, op: Extremum) -> Vec<f64> {
    let table = OffsetTable::new(*shape, se.offsets().to_vec());
    (0..shape.len())
        .into_par_iter()
        .map(|i| {
            let mut m = op.neutral();
            table.visit(i, |_, j| m = op.pick(m, data[j]));
            m
        })
        .collect()
}

fn separable(data: &[f64], shape: &GridShape, radii: [usize; 3], op: Extremum) -> Vec<f64> {
    let mut cur = data.to_vec();
    let ext = shape.extents();
    for axis in 0..3 {
        let r = radii[axis];
        let n = ext[axis];
        if r == 0 || n == 1 {
            continue;
        }
        if axis == 0 {
            cur.par_chunks_mut(n).for_each(|row| {
                let out = running_extremum(row, r, op);
                row.copy_from_slice(&out);
            });
            continue;
        }
        let stride: usize = ext[..axis].iter().product();
        let block = stride * n;
        let lines = shape.len() / n;
        let base = |l: usize| (l / stride) * block + l % stride;
        let src = &cur;
        let results: Vec<Vec<f64>> = (0..lines)
            .into_par_iter()
            .map(|l| {
                let b = base(l);
                let line: Vec<f64> = (0..n).map(|k| src[b + k * stride]).collect();
                running_extremum(&line, r, op)
            })
            .collect();
        for (l, line) in results.into_iter().enumerate() {
            let b = base(l);
            for (k, v) in line.into_iter().enumerate() {
                cur[b + k * stride] = v;
            }
        }
    }
    cur
}

// Extremum over [i − r, i + r] ∩ [0, n) for every i, by van Herk/Gil–Werman.
fn running_extremum(line: &[f64], r: usize, op: Extremum) -> Vec<f64> {
    let n = line.len();
    let w = 2 * r + 1;
    let padded_len = (n + 2 * r).div_ceil(w) * w;
    let mut f = vec![op.neutral(); padded_len];
    f[r..r + n].copy_from_slice(line);
    // g: running extremum from each block start; h: to each block end
    let mut g = f.clone();
    let mut h = f;
    for start in (0..padded_len).step_by(w) {
        for k in start + 1..start + w {
            g[k] = op.pick(g[k - 1], g[k]);
        }
        for k in (start..start + w - 1).rev() {
            h[k] = op.pick(h[k + 1], h[k]);
        }
    }
    // padded window of output i is [i, i + 2r]
    (0..n).map(|i| op.pick(h[i], g[i + 2 * r])).collect()
}
