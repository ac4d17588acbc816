//! Named operations and the two application pipelines: segmentation of
//! aligned fibre regions, and enhancement of displacement fields.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::flat_morph::{self, MorphParams, ShockConvention};
use crate::image::{
    AnyImage, DirectionalImage, Image, ImageError, ScalarImage, StructuringElement,
};
use crate::multiscale::{self, ScaleError, ScaleParams};
use crate::sphere::{fisher_median, MedianConfig, SphereError, UnitVector3};
use crate::synth::SynthRng;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("direction image {directions:?} and magnitude image {magnitudes:?} differ in shape")]
    ShapeMismatch {
        directions: Vec<usize>,
        magnitudes: Vec<usize>,
    },
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error(transparent)]
    Scale(#[from] ScaleError),
    #[error(transparent)]
    Sphere(#[from] SphereError),
}

/// Largest number of pixels handed to the median when estimating `mu`.
pub const MU_SAMPLE_LIMIT: usize = 100_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Operation {
    Erode,
    Dilate,
    Open,
    Close,
    Gradient,
    Laplacian,
    Shock,
    MsErode,
    MsDilate,
    MsOpen,
    MsClose,
    MsGradient,
    MsShock,
    Depth,
    Median,
}

impl Operation {
    pub const ALL: [Operation; 15] = [
        Operation::Erode,
        Operation::Dilate,
        Operation::Open,
        Operation::Close,
        Operation::Gradient,
        Operation::Laplacian,
        Operation::Shock,
        Operation::MsErode,
        Operation::MsDilate,
        Operation::MsOpen,
        Operation::MsClose,
        Operation::MsGradient,
        Operation::MsShock,
        Operation::Depth,
        Operation::Median,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Operation::Erode => "erode",
            Operation::Dilate => "dilate",
            Operation::Open => "open",
            Operation::Close => "close",
            Operation::Gradient => "gradient",
            Operation::Laplacian => "laplacian",
            Operation::Shock => "shock",
            Operation::MsErode => "ms-erode",
            Operation::MsDilate => "ms-dilate",
            Operation::MsOpen => "ms-open",
            Operation::MsClose => "ms-close",
            Operation::MsGradient => "ms-gradient",
            Operation::MsShock => "ms-shock",
            Operation::Depth => "depth",
            Operation::Median => "median",
        }
    }

    pub fn needs_se(self) -> bool {
        matches!(
            self,
            Operation::Erode
                | Operation::Dilate
                | Operation::Open
                | Operation::Close
                | Operation::Gradient
                | Operation::Laplacian
                | Operation::Shock
        )
    }

    pub fn needs_scale(self) -> bool {
        matches!(
            self,
            Operation::MsErode
                | Operation::MsDilate
                | Operation::MsOpen
                | Operation::MsClose
                | Operation::MsGradient
                | Operation::MsShock
        )
    }
}

impl FromStr for Operation {
    type Err = PipelineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Operation::ALL
            .into_iter()
            .find(|op| op.name() == s)
            .ok_or_else(|| PipelineError::InvalidParam(format!("unknown operation {s:?}")))
    }
}

impl fmt::Display for Operation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Parameters shared by all operations; each uses the fields it needs.
#[derive(Clone, Debug, PartialEq)]
pub struct OpParams {
    pub mu: UnitVector3,
    pub se: Option<StructuringElement>,
    pub t: Option<f64>,
    pub convention: ShockConvention,
    /// Seed for the pixel subsample of the median on large images.
    pub seed: u64,
}

impl OpParams {
    pub fn new(mu: UnitVector3) -> Self {
        Self {
            mu,
            se: None,
            t: None,
            convention: ShockConvention::default(),
            seed: 0,
        }
    }

    fn morph(&self, op: Operation) -> Result<MorphParams, PipelineError> {
        let se = self.se.clone().ok_or_else(|| {
            PipelineError::InvalidParam(format!("{op} needs a structuring element"))
        })?;
        Ok(MorphParams::new(self.mu, se))
    }

    fn scale(&self, op: Operation) -> Result<ScaleParams, PipelineError> {
        let t = self
            .t
            .ok_or_else(|| PipelineError::InvalidParam(format!("{op} needs a scale t")))?;
        Ok(ScaleParams::new(self.mu, t)?)
    }
}

/// Applies `op` to `img`. The median yields a 1×1 directional image.
pub fn apply(
    op: Operation,
    img: &DirectionalImage,
    p: &OpParams,
) -> Result<AnyImage, PipelineError> {
    use Operation::*;
    Ok(match op {
        Erode => flat_morph::erode(img, &p.morph(op)?).into(),
        Dilate => flat_morph::dilate(img, &p.morph(op)?).into(),
        Open => flat_morph::open(img, &p.morph(op)?).into(),
        Close => flat_morph::close(img, &p.morph(op)?).into(),
        Gradient => flat_morph::gradient(img, &p.morph(op)?).into(),
        Laplacian => flat_morph::laplacian(img, &p.morph(op)?).into(),
        Shock => flat_morph::shock(img, &p.morph(op)?, p.convention).into(),
        MsErode => multiscale::ms_erode(img, &p.scale(op)?).into(),
        MsDilate => multiscale::ms_dilate(img, &p.scale(op)?).into(),
        MsOpen => multiscale::ms_open(img, &p.scale(op)?).into(),
        MsClose => multiscale::ms_close(img, &p.scale(op)?).into(),
        MsGradient => multiscale::ms_gradient(img, &p.scale(op)?).into(),
        MsShock => multiscale::ms_shock(img, &p.scale(op)?, p.convention).into(),
        Depth => img.depth_field(&p.mu).into(),
        Median => {
            let m = estimate_mu(img, p.seed)?;
            let shape = crate::image::GridShape::d2(1, 1)?;
            Image::filled(shape, m).into()
        }
    })
}

/// Fisher median of the image's pixels, or of a seeded subsample of
/// [`MU_SAMPLE_LIMIT`] distinct pixels when the image is larger.
pub fn estimate_mu(img: &DirectionalImage, seed: u64) -> Result<UnitVector3, PipelineError> {
    let px = img.pixels();
    let cfg = MedianConfig::default();
    if px.len() <= MU_SAMPLE_LIMIT {
        return Ok(fisher_median(px, &cfg)?);
    }
    // partial Fisher–Yates shuffle of the pixel indices
    let mut rng = SynthRng::new(seed);
    let mut idx: Vec<usize> = (0..px.len()).collect();
    for k in 0..MU_SAMPLE_LIMIT {
        let span = (idx.len() - k) as f64;
        let r = k + ((rng.uniform() * span) as usize).min(idx.len() - k - 1);
        idx.swap(k, r);
    }
    let sample: Vec<UnitVector3> = idx[..MU_SAMPLE_LIMIT].iter().map(|&i| px[i]).collect();
    Ok(fisher_median(&sample, &cfg)?)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum DeviationMode {
    /// `arccos(|vᵀμ|)` in `[0, π/2]`: fibre directions are sign-free.
    #[default]
    Axial,
    /// `arccos(vᵀμ)` in `[0, π]`.
    Signed,
}

/// Per-pixel angular deviation from `mu`.
pub fn deviation_map(img: &DirectionalImage, mu: &UnitVector3, mode: DeviationMode) -> ScalarImage {
    img.map(|v| {
        let c = match mode {
            DeviationMode::Axial => v.dot(mu).abs(),
            DeviationMode::Signed => v.dot(mu),
        };
        c.clamp(-1.0, 1.0).acos()
    })
}

/// 1 where `dev ≤ threshold`, 0 elsewhere.
pub fn threshold_mask(dev: &ScalarImage, threshold: f64) -> ScalarImage {
    dev.map(|&d| if d <= threshold { 1.0 } else { 0.0 })
}

#[derive(Clone, Debug, PartialEq)]
pub struct GfrpConfig {
    pub mu: UnitVector3,
    pub se: StructuringElement,
    pub threshold: f64,
    pub mode: DeviationMode,
}

impl GfrpConfig {
    pub const DEFAULT_THRESHOLD: f64 = 1.5;
    pub const DEFAULT_EDGE: usize = 7;

    /// `mu = e_y`, a cube (or square) of edge 7, threshold 1.5, axial.
    pub fn defaults(ndim: usize) -> Result<Self, PipelineError> {
        Ok(Self {
            mu: UnitVector3::E_Y,
            se: StructuringElement::make_box(&vec![Self::DEFAULT_EDGE; ndim])?,
            threshold: Self::DEFAULT_THRESHOLD,
            mode: DeviationMode::Axial,
        })
    }
}

/// Closing along `mu`, then a deviation threshold. Returns the 0/1 mask of
/// aligned pixels.
pub fn gfrp_segment(
    img: &DirectionalImage,
    cfg: &GfrpConfig,
) -> Result<ScalarImage, PipelineError> {
    if !(0.0..=std::f64::consts::PI).contains(&cfg.threshold) {
        return Err(PipelineError::InvalidParam(format!(
            "threshold {} outside [0, π]",
            cfg.threshold
        )));
    }
    let closed = flat_morph::close(img, &MorphParams::new(cfg.mu, cfg.se.clone()));
    Ok(threshold_mask(
        &deviation_map(&closed, &cfg.mu, cfg.mode),
        cfg.threshold,
    ))
}

/// Applies `op` to the unit directions of a vector field. Directional
/// results come back with the original magnitudes, which are returned
/// unchanged.
pub fn displacement_enhance(
    directions: &DirectionalImage,
    magnitudes: &ScalarImage,
    op: Operation,
    p: &OpParams,
) -> Result<(AnyImage, ScalarImage), PipelineError> {
    if directions.shape() != magnitudes.shape() {
        return Err(PipelineError::ShapeMismatch {
            directions: directions.shape().dims().to_vec(),
            magnitudes: magnitudes.shape().dims().to_vec(),
        });
    }
    if op == Operation::Median {
        return Err(PipelineError::InvalidParam(
            "median does not produce a field".into(),
        ));
    }
    Ok((apply(op, directions, p)?, magnitudes.clone()))
}
