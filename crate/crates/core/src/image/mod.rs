//! Dense 2D/3D pixel grids, flat structuring elements and file formats.
//!
//! Pixels are stored x-fastest: the linear index of `(x, y, z)` is
//! `x + nx * (y + ny * z)`. A 2D grid behaves as a 3D grid with `nz = 1`,
//! so structuring elements of either dimension apply to either image; the
//! part of a structuring element that falls outside the domain is ignored.

mod csv_io;
mod dvf;

pub use csv_io::{read_csv, write_csv, write_depth_csv};
pub use dvf::{read_dvf, write_dvf, DVF_MAGIC};

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use thiserror::Error;

use crate::sphere::UnitVector3;

/// Largest pixel count a grid may hold.
pub const MAX_PIXELS: usize = 1 << 31;

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("invalid grid shape: {0}")]
    InvalidShape(String),
    #[error("invalid structuring element: {0}")]
    InvalidStructuringElement(String),
    #[error("pixel count {got} does not match grid size {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("position {0:?} lies outside the grid")]
    OutOfBounds([usize; 3]),
    #[error("malformed file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Extents of a 2D or 3D grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct GridShape {
    dims: [usize; 3],
    ndim: usize,
}

impl GridShape {
    pub fn new(dims: &[usize]) -> Result<Self, ImageError> {
        if !(dims.len() == 2 || dims.len() == 3) {
            return Err(ImageError::InvalidShape(format!(
                "expected 2 or 3 dimensions, got {}",
                dims.len()
            )));
        }
        if dims.contains(&0) {
            return Err(ImageError::InvalidShape(format!("zero extent in {dims:?}")));
        }
        let total = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .filter(|&n| n <= MAX_PIXELS)
            .ok_or_else(|| ImageError::InvalidShape(format!("{dims:?} has too many pixels")))?;
        debug_assert!(total > 0);
        let mut full = [1; 3];
        full[..dims.len()].copy_from_slice(dims);
        Ok(Self {
            dims: full,
            ndim: dims.len(),
        })
    }

    pub fn d2(nx: usize, ny: usize) -> Result<Self, ImageError> {
        Self::new(&[nx, ny])
    }

    pub fn d3(nx: usize, ny: usize, nz: usize) -> Result<Self, ImageError> {
        Self::new(&[nx, ny, nz])
    }

    /// Number of axes, 2 or 3.
    #[inline]
    pub fn ndim(&self) -> usize {
        self.ndim
    }

    /// The extents actually declared, of length [`GridShape::ndim`].
    pub fn dims(&self) -> &[usize] {
        &self.dims[..self.ndim]
    }

    /// Extents padded to three axes.
    #[inline]
    pub fn extents(&self) -> [usize; 3] {
        self.dims
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn index(&self, pos: [usize; 3]) -> usize {
        pos[0] + self.dims[0] * (pos[1] + self.dims[1] * pos[2])
    }

    #[inline]
    pub fn position(&self, index: usize) -> [usize; 3] {
        let nx = self.dims[0];
        let ny = self.dims[1];
        [index % nx, (index / nx) % ny, index / (nx * ny)]
    }

    #[inline]
    pub fn contains(&self, pos: [usize; 3]) -> bool {
        pos.iter().zip(self.dims).all(|(&p, d)| p < d)
    }

    /// `pos + offset` if it lies inside the grid.
    #[inline]
    pub fn shift(&self, pos: [usize; 3], offset: [i32; 3]) -> Option<[usize; 3]> {
        let mut out = [0usize; 3];
        for k in 0..3 {
            let p = pos[k] as i64 + offset[k] as i64;
            if p < 0 || p >= self.dims[k] as i64 {
                return None;
            }
            out[k] = p as usize;
        }
        Some(out)
    }
}

/// A dense image over a [`GridShape`].
#[derive(Clone, Debug, PartialEq)]
pub struct Image<T> {
    shape: GridShape,
    data: Vec<T>,
}

pub type DirectionalImage = Image<UnitVector3>;
pub type ScalarImage = Image<f64>;

impl<T> Image<T> {
    pub fn from_vec(shape: GridShape, data: Vec<T>) -> Result<Self, ImageError> {
        if data.len() != shape.len() {
            return Err(ImageError::LengthMismatch {
                expected: shape.len(),
                got: data.len(),
            });
        }
        Ok(Self { shape, data })
    }

    pub fn from_fn(shape: GridShape, mut f: impl FnMut([usize; 3]) -> T) -> Self {
        let data = (0..shape.len()).map(|i| f(shape.position(i))).collect();
        Self { shape, data }
    }

    #[inline]
    pub fn shape(&self) -> &GridShape {
        &self.shape
    }

    #[inline]
    pub fn pixels(&self) -> &[T] {
        &self.data
    }

    pub fn into_pixels(self) -> Vec<T> {
        self.data
    }

    pub fn get(&self, pos: [usize; 3]) -> Option<&T> {
        self.shape
            .contains(pos)
            .then(|| &self.data[self.shape.index(pos)])
    }

    pub fn map<U>(&self, f: impl Fn(&T) -> U) -> Image<U> {
        Image {
            shape: self.shape,
            data: self.data.iter().map(f).collect(),
        }
    }
}

impl<T: Clone> Image<T> {
    pub fn filled(shape: GridShape, value: T) -> Self {
        Self {
            shape,
            data: vec![value; shape.len()],
        }
    }
}

impl DirectionalImage {
    /// Per-pixel depth about `mu`.
    pub fn depth_field(&self, mu: &UnitVector3) -> ScalarImage {
        self.map(|v| crate::sphere::depth(v, mu).value())
    }
}

/// A finite, origin-centred, point-symmetric set of integer grid offsets.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StructuringElement {
    ndim: usize,
    offsets: Vec<[i32; 3]>,
    box_radii: Option<[usize; 3]>,
}

impl StructuringElement {
    /// Builds an element from explicit offsets; duplicates are merged.
    pub fn from_offsets(ndim: usize, offsets: &[[i32; 3]]) -> Result<Self, ImageError> {
        if !(ndim == 2 || ndim == 3) {
            return Err(ImageError::InvalidStructuringElement(format!(
                "dimension must be 2 or 3, got {ndim}"
            )));
        }
        let set: BTreeSet<[i32; 3]> = offsets.iter().copied().collect();
        if ndim == 2 && set.iter().any(|o| o[2] != 0) {
            return Err(ImageError::InvalidStructuringElement(
                "2D element with a non-zero z offset".into(),
            ));
        }
        if !set.contains(&[0, 0, 0]) {
            return Err(ImageError::InvalidStructuringElement(
                "origin is missing".into(),
            ));
        }
        if let Some(o) = set.iter().find(|o| !set.contains(&[-o[0], -o[1], -o[2]])) {
            return Err(ImageError::InvalidStructuringElement(format!(
                "not symmetric: {o:?} has no mirror"
            )));
        }
        Ok(Self::from_set(ndim, set))
    }

    fn from_set(ndim: usize, set: BTreeSet<[i32; 3]>) -> Self {
        let mut offsets: Vec<[i32; 3]> = set.into_iter().collect();
        // scan order: by z, then y, then x
        offsets.sort_by_key(|o| (o[2], o[1], o[0]));
        let mut radii = [0usize; 3];
        for o in &offsets {
            for k in 0..3 {
                radii[k] = radii[k].max(o[k].unsigned_abs() as usize);
            }
        }
        let full: usize = radii.iter().map(|r| 2 * r + 1).product();
        let box_radii = (full == offsets.len()).then_some(radii);
        Self {
            ndim,
            offsets,
            box_radii,
        }
    }

    /// Full box with the given odd edge lengths.
    pub fn make_box(edges: &[usize]) -> Result<Self, ImageError> {
        if !(edges.len() == 2 || edges.len() == 3) {
            return Err(ImageError::InvalidStructuringElement(format!(
                "expected 2 or 3 edge lengths, got {}",
                edges.len()
            )));
        }
        if let Some(e) = edges.iter().find(|&&e| e % 2 == 0) {
            return Err(ImageError::InvalidStructuringElement(format!(
                "edge length {e} is not odd"
            )));
        }
        let mut r = [0i32; 3];
        for (k, &e) in edges.iter().enumerate() {
            r[k] = i32::try_from(e / 2).map_err(|_| {
                ImageError::InvalidStructuringElement(format!("edge length {e} too large"))
            })?;
        }
        let mut set = BTreeSet::new();
        for z in -r[2]..=r[2] {
            for y in -r[1]..=r[1] {
                for x in -r[0]..=r[0] {
                    set.insert([x, y, z]);
                }
            }
        }
        Ok(Self::from_set(edges.len(), set))
    }

    /// The single-offset element `{0}`.
    pub fn identity(ndim: usize) -> Result<Self, ImageError> {
        Self::make_box(&vec![1; ndim])
    }

    /// Minkowski sum `self ⊕ other`.
    pub fn minkowski_sum(&self, other: &Self) -> Self {
        let mut set = BTreeSet::new();
        for a in &self.offsets {
            for b in &other.offsets {
                set.insert([a[0] + b[0], a[1] + b[1], a[2] + b[2]]);
            }
        }
        Self::from_set(self.ndim.max(other.ndim), set)
    }

    /// `t`-fold Minkowski sum of the element with itself.
    pub fn scale(&self, t: usize) -> Result<Self, ImageError> {
        if t == 0 {
            return Err(ImageError::InvalidStructuringElement(
                "scale factor must be at least 1".into(),
            ));
        }
        let mut out = self.clone();
        for _ in 1..t {
            out = out.minkowski_sum(self);
        }
        Ok(out)
    }

    #[inline]
    pub fn ndim(&self) -> usize {
        self.ndim
    }

    pub fn offsets(&self) -> &[[i32; 3]] {
        &self.offsets
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    pub fn contains(&self, offset: [i32; 3]) -> bool {
        self.offsets
            .binary_search_by_key(&(offset[2], offset[1], offset[0]), |o| (o[2], o[1], o[0]))
            .is_ok()
    }

    /// Per-axis half widths when the element is a full box.
    pub fn box_radii(&self) -> Option<[usize; 3]> {
        self.box_radii
    }
}

/// Offsets of `se` around `center` that stay inside the grid, paired with
/// the pixel found there.
pub fn window<T: Clone>(
    img: &Image<T>,
    center: [usize; 3],
    se: &StructuringElement,
) -> Result<Vec<([i32; 3], T)>, ImageError> {
    let shape = img.shape();
    if !shape.contains(center) {
        return Err(ImageError::OutOfBounds(center));
    }
    Ok(se
        .offsets()
        .iter()
        .filter_map(|&o| {
            shape
                .shift(center, o)
                .map(|p| (o, img.pixels()[shape.index(p)].clone()))
        })
        .collect())
}

/// Offsets resolved against one grid: linear index deltas plus the margin
/// inside which no bounds checks are needed.
#[derive(Clone, Debug)]
pub(crate) struct OffsetTable {
    shape: GridShape,
    offsets: Vec<[i32; 3]>,
    deltas: Vec<isize>,
    reach: [usize; 3],
}

impl OffsetTable {
    pub(crate) fn new(shape: GridShape, offsets: Vec<[i32; 3]>) -> Self {
        let [nx, ny, _] = shape.extents();
        let deltas = offsets
            .iter()
            .map(|o| o[0] as isize + nx as isize * (o[1] as isize + ny as isize * o[2] as isize))
            .collect();
        let mut reach = [0usize; 3];
        for o in &offsets {
            for k in 0..3 {
                reach[k] = reach[k].max(o[k].unsigned_abs() as usize);
            }
        }
        Self {
            shape,
            offsets,
            deltas,
            reach,
        }
    }

    /// Calls `f(k, j)` for every offset `k` whose target `j` lies in the grid,
    /// in table order.
    #[inline]
    pub(crate) fn visit(&self, index: usize, mut f: impl FnMut(usize, usize)) {
        let pos = self.shape.position(index);
        let ext = self.shape.extents();
        let interior = (0..3).all(|k| pos[k] >= self.reach[k] && pos[k] + self.reach[k] < ext[k]);
        if interior {
            for (k, &d) in self.deltas.iter().enumerate() {
                f(k, (index as isize + d) as usize);
            }
        } else {
            for (k, &o) in self.offsets.iter().enumerate() {
                if let Some(p) = self.shape.shift(pos, o) {
                    f(k, self.shape.index(p));
                }
            }
        }
    }
}

/// Either kind of image, as read from a file.
#[derive(Clone, Debug, PartialEq)]
pub enum AnyImage {
    Scalar(ScalarImage),
    Directional(DirectionalImage),
}

impl AnyImage {
    pub fn shape(&self) -> &GridShape {
        match self {
            AnyImage::Scalar(i) => i.shape(),
            AnyImage::Directional(i) => i.shape(),
        }
    }

    pub fn into_directional(self) -> Result<DirectionalImage, ImageError> {
        match self {
            AnyImage::Directional(i) => Ok(i),
            AnyImage::Scalar(_) => Err(ImageError::Format(
                "expected a directional image, found a scalar image".into(),
            )),
        }
    }

    pub fn into_scalar(self) -> Result<ScalarImage, ImageError> {
        match self {
            AnyImage::Scalar(i) => Ok(i),
            AnyImage::Directional(_) => Err(ImageError::Format(
                "expected a scalar image, found a directional image".into(),
            )),
        }
    }
}

impl From<ScalarImage> for AnyImage {
    fn from(i: ScalarImage) -> Self {
        AnyImage::Scalar(i)
    }
}

impl From<DirectionalImage> for AnyImage {
    fn from(i: DirectionalImage) -> Self {
        AnyImage::Directional(i)
    }
}

/// On-disk encoding, picked from the file extension.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FileFormat {
    Dvf,
    Csv,
}

impl FileFormat {
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => FileFormat::Csv,
            _ => FileFormat::Dvf,
        }
    }
}

/// Loads a DVF1 or CSV file; the extension `.csv` selects CSV.
pub fn load(path: &Path) -> Result<AnyImage, ImageError> {
    let reader = BufReader::new(File::open(path)?);
    match FileFormat::from_path(path) {
        FileFormat::Csv => read_csv(reader),
        FileFormat::Dvf => read_dvf(reader),
    }
}

pub fn save(path: &Path, img: &AnyImage) -> Result<(), ImageError> {
    let mut w = BufWriter::new(File::create(path)?);
    match FileFormat::from_path(path) {
        FileFormat::Csv => write_csv(&mut w, img)?,
        FileFormat::Dvf => write_dvf(&mut w, img)?,
    }
    w.flush()?;
    Ok(())
}
