//! Empirical Fisher spherical median: the direction minimising the summed
//! arc-length distance to a sample.
//!
//! The solver is a Weiszfeld iteration carried out in the tangent space of
//! the current iterate, with the Vardi–Zhang correction when the iterate
//! sits on a sample point and step halving whenever a full step fails to
//! decrease the objective. It starts from the Euclidean mean and, when the
//! sample is dispersed, also from the best points of a Fibonacci lattice
//! search refined by golden-section line searches.

use std::f64::consts::PI;

use super::{SphereError, UnitVector3};

// Distance below which a sample point coincides with the iterate.
const COINCIDE: f64 = 1e-10;
// Distance from π beyond which a sample point is treated as antipodal.
const ANTIPODE: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct MedianConfig {
    pub max_iterations: usize,
    /// Stop once the proposed tangent step is shorter than this (radians).
    pub step_tolerance: f64,
    /// Lattice size for the fallback start.
    pub grid_points: usize,
}

impl Default for MedianConfig {
    fn default() -> Self {
        Self {
            max_iterations: 10_000,
            step_tolerance: 1e-13,
            grid_points: 40_000,
        }
    }
}

/// `Σ arccos(Xᵢᵀγ)`, with each arc evaluated by [`UnitVector3::angle_to`].
pub fn median_objective(sample: &[UnitVector3], gamma: &UnitVector3) -> f64 {
    sample.iter().map(|x| x.angle_to(gamma)).sum()
}

/// Minimiser of `Σ arccos(Xᵢᵀγ)` over the sphere.
///
/// Concentrated samples descend from the Euclidean mean. Dispersed samples,
/// where the objective can have several local minima, also descend from the
/// best separated points of a lattice screen, and the lowest result wins.
///
/// Returns [`SphereError::NotConverged`] carrying the best iterate if no
/// descent reached the step tolerance within the iteration budget.
pub fn fisher_median(
    sample: &[UnitVector3],
    config: &MedianConfig,
) -> Result<UnitVector3, SphereError> {
    if sample.is_empty() {
        return Err(SphereError::EmptySample);
    }
    let n = sample.len() as f64;
    let mut sum = [0.0; 3];
    for x in sample {
        sum[0] += x.x();
        sum[1] += x.y();
        sum[2] += x.z();
    }
    let mean_norm = (sum[0] * sum[0] + sum[1] * sum[1] + sum[2] * sum[2]).sqrt() / n;
    let mut starts = Vec::new();
    if mean_norm >= 1e-6 {
        starts.push(UnitVector3::new(sum[0], sum[1], sum[2])?);
    }
    if mean_norm < DISPERSED {
        starts.extend(lattice_starts(sample, config.grid_points.max(1)));
    }

    let mut best: Option<(UnitVector3, f64, bool)> = None;
    for start in starts {
        let (gamma, f, converged) = descend(sample, start, config);
        let better = match best {
            None => true,
            Some((_, bf, bc)) => (converged && !bc) || (converged == bc && f < bf),
        };
        if better {
            best = Some((gamma, f, converged));
        }
    }
    match best.expect("at least one start") {
        (gamma, _, true) => Ok(gamma),
        (gamma, f, false) => Err(SphereError::NotConverged {
            best: gamma,
            objective: f,
            iterations: config.max_iterations,
        }),
    }
}

// Mean resultant length below which extra lattice starts are tried.
const DISPERSED: f64 = 0.5;
// Sample points used to screen the lattice, and starts kept from it.
const SCREEN_POINTS: usize = 2_000;
const LATTICE_STARTS: usize = 4;
// Minimum angle between two kept lattice starts.
const START_SEPARATION: f64 = 0.5;

// Weiszfeld descent from `gamma`; the flag tells whether it converged.
fn descend(
    sample: &[UnitVector3],
    mut gamma: UnitVector3,
    config: &MedianConfig,
) -> (UnitVector3, f64, bool) {
    let mut f = median_objective(sample, &gamma);
    for _ in 0..config.max_iterations {
        let step = match weiszfeld_step(sample, &gamma) {
            Some(step) => step,
            None => return (gamma, f, true),
        };
        let len = norm(&step);
        if len < config.step_tolerance {
            return (gamma, f, true);
        }
        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let cand = exp_map(&gamma, &step, scale);
            let fc = median_objective(sample, &cand);
            if fc <= f {
                accepted = Some((cand, fc));
                break;
            }
            scale *= 0.5;
        }
        match accepted {
            Some((cand, fc)) => {
                let moved = len * scale;
                gamma = cand;
                f = fc;
                if moved < config.step_tolerance {
                    return (gamma, f, true);
                }
            }
            // no descent along the step at any scale: a stationary point
            None => return (gamma, f, true),
        }
    }
    (gamma, f, false)
}

// Returns None when γ coincides with sample points whose weight dominates
// the pull of all other points, i.e. γ is already optimal.
fn weiszfeld_step(sample: &[UnitVector3], gamma: &UnitVector3) -> Option<[f64; 3]> {
    let g = gamma.to_array();
    let mut pull = [0.0; 3];
    let mut weight = 0.0;
    let mut coincident = 0usize;
    for x in sample {
        let c = x.dot(gamma).clamp(-1.0, 1.0);
        let d = x.angle_to(gamma);
        if d <= COINCIDE {
            coincident += 1;
            continue;
        }
        if d >= PI - ANTIPODE {
            continue;
        }
        // unit tangent at γ pointing at x
        let t = [x.x() - c * g[0], x.y() - c * g[1], x.z() - c * g[2]];
        let tn = norm(&t);
        if tn == 0.0 {
            continue;
        }
        for k in 0..3 {
            pull[k] += t[k] / tn;
        }
        weight += 1.0 / d;
    }
    if weight == 0.0 {
        return None;
    }
    let r = norm(&pull);
    let shrink = if coincident > 0 {
        if r <= coincident as f64 {
            return None;
        }
        1.0 - coincident as f64 / r
    } else {
        1.0
    };
    let s = shrink / weight;
    Some([pull[0] * s, pull[1] * s, pull[2] * s])
}

fn norm(v: &[f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

fn exp_map(gamma: &UnitVector3, tangent: &[f64; 3], scale: f64) -> UnitVector3 {
    let len = norm(tangent) * scale;
    if len == 0.0 {
        return *gamma;
    }
    let (s, c) = len.sin_cos();
    let k = s * scale / len;
    UnitVector3::from_unit_parts(
        c * gamma.x() + k * tangent[0],
        c * gamma.y() + k * tangent[1],
        c * gamma.z() + k * tangent[2],
    )
}

/// Point `i` of an `n`-point Fibonacci lattice on the sphere.
pub(crate) fn fibonacci_point(i: usize, n: usize) -> UnitVector3 {
    let golden = PI * (3.0 - 5f64.sqrt());
    let z = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
    let r = (1.0 - z * z).max(0.0).sqrt();
    let phi = golden * i as f64;
    UnitVector3::from_unit_parts(r * phi.cos(), r * phi.sin(), z)
}

// The best mutually separated lattice points, screened against an evenly
// strided subsample and refined by golden-section searches on the full one.
fn lattice_starts(sample: &[UnitVector3], points: usize) -> Vec<UnitVector3> {
    let stride = sample.len().div_ceil(SCREEN_POINTS);
    let screen: Vec<UnitVector3> = sample.iter().step_by(stride).copied().collect();
    let mut scored: Vec<(f64, usize)> = (0..points)
        .map(|i| (median_objective(&screen, &fibonacci_point(i, points)), i))
        .collect();
    scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut kept: Vec<UnitVector3> = Vec::new();
    for &(_, i) in &scored {
        let p = fibonacci_point(i, points);
        if kept.iter().all(|k| k.angle_to(&p) >= START_SEPARATION) {
            kept.push(p);
            if kept.len() == LATTICE_STARTS {
                break;
            }
        }
    }
    // lattice spacing is about sqrt(4π / n)
    kept.into_iter()
        .map(|mut best| {
            let mut radius = 2.0 * (4.0 * PI / points as f64).sqrt();
            for _ in 0..6 {
                for axis in tangent_basis(&best) {
                    best = golden_section(sample, &best, &axis, radius);
                }
                radius *= 0.25;
            }
            best
        })
        .collect()
}

fn tangent_basis(g: &UnitVector3) -> [[f64; 3]; 2] {
    let a = g.to_array();
    let k = if a[0].abs() < 0.9 { 0 } else { 1 };
    let mut e = [0.0; 3];
    e[k] = 1.0;
    let d = a[k];
    let t1 = [e[0] - d * a[0], e[1] - d * a[1], e[2] - d * a[2]];
    let n1 = norm(&t1);
    let t1 = [t1[0] / n1, t1[1] / n1, t1[2] / n1];
    let t2 = [
        a[1] * t1[2] - a[2] * t1[1],
        a[2] * t1[0] - a[0] * t1[2],
        a[0] * t1[1] - a[1] * t1[0],
    ];
    [t1, t2]
}

// Golden-section search for the best point on the geodesic through `g`
// along unit tangent `dir`, within `[-radius, radius]`.
fn golden_section(
    sample: &[UnitVector3],
    g: &UnitVector3,
    dir: &[f64; 3],
    radius: f64,
) -> UnitVector3 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let eval = |s: f64| median_objective(sample, &exp_map(g, dir, s));
    let (mut lo, mut hi) = (-radius, radius);
    let mut c = hi - inv_phi * (hi - lo);
    let mut d = lo + inv_phi * (hi - lo);
    let mut fc = eval(c);
    let mut fd = eval(d);
    for _ in 0..60 {
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - inv_phi * (hi - lo);
            fc = eval(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + inv_phi * (hi - lo);
            fd = eval(d);
        }
    }
    let s = 0.5 * (lo + hi);
    let cand = exp_map(g, dir, s);
    if median_objective(sample, &cand) <= median_objective(sample, g) {
        cand
    } else {
        *g
    }
}
