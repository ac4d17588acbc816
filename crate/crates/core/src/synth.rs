//! Seeded generators for synthetic directional images.
//!
//! All generators use ChaCha8 seeded through `seed_from_u64`. A uniform
//! variate is `(next_u64 >> 11) · 2⁻⁵³`. Pixels are visited in grid order
//! (x fastest) and each generator draws a fixed number of variates per
//! pixel, listed in its documentation, whether or not all are used. A
//! direction at angular deviation `θ` and longitude `φ` about a centre `c`
//! is `DepthOrdering::new(c).from_spherical(θ, φ)`; deviations are uniform
//! in angle, not in cap area.

use std::f64::consts::{PI, TAU};

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use thiserror::Error;

use crate::image::{DirectionalImage, GridShape, Image, ImageError, ScalarImage};
use crate::sphere::{DepthOrdering, Spherical, UnitVector3};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("angular band [{0}, {1}] is not inside [0, π]")]
    InvalidBand(f64, f64),
    #[error("invalid fixture: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Image(#[from] ImageError),
}

pub struct SynthRng(ChaCha8Rng);

impl SynthRng {
    pub fn new(seed: u64) -> Self {
        Self(ChaCha8Rng::seed_from_u64(seed))
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }
}

/// A closed interval of angular deviations within `[0, π]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AngularBand {
    lo: f64,
    hi: f64,
}

impl AngularBand {
    pub fn new(lo: f64, hi: f64) -> Result<Self, SynthError> {
        if !(0.0 <= lo && lo <= hi && hi <= PI) {
            return Err(SynthError::InvalidBand(lo, hi));
        }
        Ok(Self { lo, hi })
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    fn at(&self, u: f64) -> f64 {
        self.lo + (self.hi - self.lo) * u
    }
}

// One direction from two variates: deviation first, then longitude.
fn draw(ord: &DepthOrdering, band: &AngularBand, u_theta: f64, u_phi: f64) -> UnitVector3 {
    ord.from_spherical(Spherical {
        theta: band.at(u_theta),
        phi: TAU * u_phi,
    })
}

/// Axis-aligned rectangle `[x, x + w) × [y, y + h)` on the first two axes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Rect {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

impl Rect {
    pub fn new(x: usize, y: usize, w: usize, h: usize) -> Self {
        Self { x, y, w, h }
    }

    pub fn contains(&self, pos: [usize; 3]) -> bool {
        (self.x..self.x + self.w).contains(&pos[0]) && (self.y..self.y + self.h).contains(&pos[1])
    }

    fn fits(&self, shape: &GridShape) -> bool {
        let e = shape.extents();
        self.w > 0 && self.h > 0 && self.x + self.w <= e[0] && self.y + self.h <= e[1]
    }
}

/// Foreground objects on a background, both rotationally symmetric about `mu`.
#[derive(Clone, Debug, PartialEq)]
pub struct TwoFibreSpec {
    pub shape: GridShape,
    pub mu: UnitVector3,
    pub fg_band: AngularBand,
    pub bg_band: AngularBand,
    pub objects: Vec<Rect>,
    /// Background holes cut out of the objects.
    pub holes: Vec<Rect>,
    pub seed: u64,
}

impl TwoFibreSpec {
    /// 32×32 image, `mu = e_z`, foreground deviations in `[0, π/8]` and
    /// background in `[3π/8, 5π/8]`. The small object is 6×2 pixels, the
    /// large one 16×8 with a 2×2 hole in its middle.
    pub fn canonical(seed: u64) -> Self {
        Self {
            shape: GridShape::d2(32, 32).expect("valid shape"),
            mu: UnitVector3::E_Z,
            fg_band: AngularBand {
                lo: 0.0,
                hi: PI / 8.0,
            },
            bg_band: AngularBand {
                lo: 3.0 * PI / 8.0,
                hi: 5.0 * PI / 8.0,
            },
            objects: vec![Rect::new(4, 4, 6, 2), Rect::new(8, 14, 16, 8)],
            holes: vec![Rect::new(15, 17, 2, 2)],
            seed,
        }
    }

    pub fn is_foreground(&self, pos: [usize; 3]) -> bool {
        self.objects.iter().any(|r| r.contains(pos)) && !self.holes.iter().any(|r| r.contains(pos))
    }

    /// Pixels of `object` that are foreground, in grid order.
    pub fn object_pixels(&self, object: usize) -> Vec<usize> {
        let r = self.objects[object];
        (0..self.shape.len())
            .filter(|&i| {
                let p = self.shape.position(i);
                r.contains(p) && self.is_foreground(p)
            })
            .collect()
    }

    pub fn hole_pixels(&self) -> Vec<usize> {
        (0..self.shape.len())
            .filter(|&i| {
                let p = self.shape.position(i);
                self.holes.iter().any(|r| r.contains(p))
            })
            .collect()
    }

    fn validate(&self) -> Result<(), SynthError> {
        if self.shape.ndim() != 2 {
            return Err(SynthError::InvalidSpec("two-fibre fixture is 2D".into()));
        }
        if let Some(r) = self
            .objects
            .iter()
            .chain(&self.holes)
            .find(|r| !r.fits(&self.shape))
        {
            return Err(SynthError::InvalidSpec(format!(
                "{r:?} does not fit the grid"
            )));
        }
        Ok(())
    }
}

/// Draws two variates per pixel: deviation, longitude.
pub fn gen_two_fibre(spec: &TwoFibreSpec) -> Result<DirectionalImage, SynthError> {
    spec.validate()?;
    let ord = DepthOrdering::new(spec.mu);
    let mut rng = SynthRng::new(spec.seed);
    Ok(Image::from_fn(spec.shape, |p| {
        let (ut, up) = (rng.uniform(), rng.uniform());
        let band = if spec.is_foreground(p) {
            &spec.fg_band
        } else {
            &spec.bg_band
        };
        draw(&ord, band, ut, up)
    }))
}

/// Every pixel drawn from `band` about `mu`; two variates per pixel.
pub fn gen_band_noise(
    shape: GridShape,
    mu: &UnitVector3,
    band: &AngularBand,
    seed: u64,
) -> DirectionalImage {
    let ord = DepthOrdering::new(*mu);
    let mut rng = SynthRng::new(seed);
    Image::from_fn(shape, |_| {
        let (ut, up) = (rng.uniform(), rng.uniform());
        draw(&ord, band, ut, up)
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Magnitude {
    Constant(f64),
    /// Uniform on `[lo, hi)`.
    Uniform(f64, f64),
}

/// Two half-planes split by a line through the image centre, tilted by
/// `tilt` radians from the x axis. Directions lie near `(0, 0, 1)` on the
/// side of larger y and near `(0, 0, −1)` on the other.
#[derive(Clone, Debug, PartialEq)]
pub struct DisplacementSpec {
    pub shape: GridShape,
    pub tilt: f64,
    pub noise: AngularBand,
    pub magnitude: Magnitude,
    pub seed: u64,
}

impl DisplacementSpec {
    pub fn new(shape: GridShape, seed: u64) -> Self {
        Self {
            shape,
            tilt: 0.3,
            noise: AngularBand {
                lo: 0.0,
                hi: PI / 8.0,
            },
            magnitude: Magnitude::Uniform(0.5, 2.0),
            seed,
        }
    }

    pub fn is_upper(&self, pos: [usize; 3]) -> bool {
        let e = self.shape.extents();
        let cx = (e[0] as f64 - 1.0) / 2.0;
        let cy = (e[1] as f64 - 1.0) / 2.0;
        let (s, c) = self.tilt.sin_cos();
        c * (pos[1] as f64 - cy) - s * (pos[0] as f64 - cx) >= 0.0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DisplacementFixture {
    pub directions: DirectionalImage,
    pub magnitudes: ScalarImage,
    pub upper: Vec<bool>,
}

impl DisplacementFixture {
    /// Pixels whose 3×3 neighbourhood holds both sides of the fault.
    pub fn fault_band(&self) -> Vec<bool> {
        let shape = *self.directions.shape();
        (0..shape.len())
            .map(|i| {
                let p = shape.position(i);
                let mut seen = [false; 2];
                for dy in -1..=1 {
                    for dx in -1..=1 {
                        if let Some(q) = shape.shift(p, [dx, dy, 0]) {
                            seen[usize::from(self.upper[shape.index(q)])] = true;
                        }
                    }
                }
                seen[0] && seen[1]
            })
            .collect()
    }
}

/// Three variates per pixel: deviation, longitude, magnitude.
pub fn gen_displacement_fixture(
    spec: &DisplacementSpec,
) -> Result<DisplacementFixture, SynthError> {
    if spec.shape.ndim() != 2 {
        return Err(SynthError::InvalidSpec("displacement fixture is 2D".into()));
    }
    let magnitude_ok = match spec.magnitude {
        Magnitude::Constant(m) => m > 0.0 && m.is_finite(),
        Magnitude::Uniform(lo, hi) => lo > 0.0 && lo <= hi && hi.is_finite(),
    };
    if !magnitude_ok {
        return Err(SynthError::InvalidSpec(format!(
            "magnitudes must be positive: {:?}",
            spec.magnitude
        )));
    }
    let up = DepthOrdering::new(UnitVector3::E_Z);
    let down = DepthOrdering::new(-UnitVector3::E_Z);
    let mut rng = SynthRng::new(spec.seed);
    let n = spec.shape.len();
    let mut dirs = Vec::with_capacity(n);
    let mut mags = Vec::with_capacity(n);
    let mut upper = Vec::with_capacity(n);
    for i in 0..n {
        let p = spec.shape.position(i);
        let (ut, up_phi, um) = (rng.uniform(), rng.uniform(), rng.uniform());
        let is_up = spec.is_upper(p);
        let ord = if is_up { &up } else { &down };
        dirs.push(draw(ord, &spec.noise, ut, up_phi));
        mags.push(match spec.magnitude {
            Magnitude::Constant(m) => m,
            Magnitude::Uniform(lo, hi) => lo + (hi - lo) * um,
        });
        upper.push(is_up);
    }
    Ok(DisplacementFixture {
        directions: Image::from_vec(spec.shape, dirs)?,
        magnitudes: Image::from_vec(spec.shape, mags)?,
        upper,
    })
}

/// A 3D fibre composite: slabs at both ends of the x axis hold fibres
/// aligned with `mu` (axially, with a random sign) and the core between
/// them holds fibres roughly perpendicular to `mu`. A fraction `speckle`
/// of slab voxels is drawn from the core band instead, standing in for
/// local misalignments inside aligned regions.
#[derive(Clone, Debug, PartialEq)]
pub struct FibreCompositeSpec {
    pub shape: GridShape,
    pub mu: UnitVector3,
    pub slab_width: usize,
    pub aligned_band: AngularBand,
    pub core_band: AngularBand,
    pub speckle: f64,
    pub seed: u64,
}

impl FibreCompositeSpec {
    /// 48×32×32 voxels, `mu = e_y`, 12-voxel slabs, aligned deviations in
    /// `[0, 0.3]`, core deviations within 0.05 of `π/2`, 15% speckle.
    pub fn canonical(seed: u64) -> Self {
        Self {
            shape: GridShape::d3(48, 32, 32).expect("valid shape"),
            mu: UnitVector3::E_Y,
            slab_width: 12,
            aligned_band: AngularBand { lo: 0.0, hi: 0.3 },
            core_band: AngularBand {
                lo: PI / 2.0 - 0.05,
                hi: PI / 2.0 + 0.05,
            },
            speckle: 0.15,
            seed,
        }
    }

    /// Ground truth: whether the voxel lies in an aligned slab.
    pub fn in_slab(&self, pos: [usize; 3]) -> bool {
        let nx = self.shape.extents()[0];
        pos[0] < self.slab_width || pos[0] + self.slab_width >= nx
    }
}

/// Four variates per voxel: speckle, deviation, longitude, sign.
pub fn gen_fibre_composite(spec: &FibreCompositeSpec) -> Result<DirectionalImage, SynthError> {
    if !(0.0..=1.0).contains(&spec.speckle) {
        return Err(SynthError::InvalidSpec(format!(
            "speckle fraction {} outside [0, 1]",
            spec.speckle
        )));
    }
    let ord = DepthOrdering::new(spec.mu);
    let mut rng = SynthRng::new(spec.seed);
    Ok(Image::from_fn(spec.shape, |p| {
        let (us, ut, up, usign) = (rng.uniform(), rng.uniform(), rng.uniform(), rng.uniform());
        let aligned = spec.in_slab(p) && us >= spec.speckle;
        let band = if aligned {
            &spec.aligned_band
        } else {
            &spec.core_band
        };
        let v = draw(&ord, band, ut, up);
        if usign < 0.5 {
            -v
        } else {
            v
        }
    }))
}
