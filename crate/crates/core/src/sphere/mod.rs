//! Geometry on the unit sphere S².
//!
//! Unit vectors, spherical coordinates, rotations along great circles, the
//! angular projection depth `(1 + xᵀμ) / 2` and the total order it induces
//! on directions once ties are broken by longitude about the centre `μ`.

mod median;

pub use median::{fisher_median, median_objective, MedianConfig};

use std::cmp::Ordering;
use std::f64::consts::{PI, TAU};
use std::fmt;
use std::ops::{Mul, Neg};

use nalgebra::{Matrix3, Rotation3 as NaRotation3, Unit, Vector3};
use thiserror::Error;

/// Two depth values closer than this are treated as a tie.
pub const DEPTH_TIE_TOLERANCE: f64 = 1e-12;

/// Inputs shorter than this cannot be normalised.
pub const MIN_NORM: f64 = 1e-12;

// Inputs whose norm is within this of 1 are already on the sphere up to
// round-off and are stored unchanged, which keeps normalisation idempotent.
const RENORM_SLACK: f64 = 8.0 * f64::EPSILON;

// Below this perpendicular length a vector is treated as lying on the axis.
const AXIS_EPS: f64 = 4.0 * f64::EPSILON;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SphereError {
    #[error("vector norm {0:e} is too small to normalise")]
    Degenerate(f64),
    #[error("vector has non-finite components")]
    NonFinite,
    #[error("matrix is not a proper rotation")]
    NotARotation,
    #[error("median of an empty sample")]
    EmptySample,
    #[error("median did not converge after {iterations} iterations (objective {objective})")]
    NotConverged {
        best: UnitVector3,
        objective: f64,
        iterations: usize,
    },
}

/// A point on S².
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UnitVector3 {
    x: f64,
    y: f64,
    z: f64,
}

impl UnitVector3 {
    pub const E_X: Self = Self {
        x: 1.0,
        y: 0.0,
        z: 0.0,
    };
    pub const E_Y: Self = Self {
        x: 0.0,
        y: 1.0,
        z: 0.0,
    };
    pub const E_Z: Self = Self {
        x: 0.0,
        y: 0.0,
        z: 1.0,
    };

    /// Normalises `(x, y, z)` onto the sphere.
    ///
    /// Vectors that are already unit up to a few ulps are kept bit-for-bit.
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self, SphereError> {
        if !(x.is_finite() && y.is_finite() && z.is_finite()) {
            return Err(SphereError::NonFinite);
        }
        let norm = (x * x + y * y + z * z).sqrt();
        if norm < MIN_NORM {
            return Err(SphereError::Degenerate(norm));
        }
        Ok(Self::normalize_parts(x, y, z, norm))
    }

    pub fn from_array(v: [f64; 3]) -> Result<Self, SphereError> {
        Self::new(v[0], v[1], v[2])
    }

    /// For internal results that are unit up to accumulated round-off.
    pub(crate) fn from_unit_parts(x: f64, y: f64, z: f64) -> Self {
        let norm = (x * x + y * y + z * z).sqrt();
        debug_assert!(norm > 0.5, "not a unit vector: norm {norm}");
        Self::normalize_parts(x, y, z, norm)
    }

    fn normalize_parts(x: f64, y: f64, z: f64, norm: f64) -> Self {
        if (norm - 1.0).abs() <= RENORM_SLACK {
            Self { x, y, z }
        } else {
            Self {
                x: x / norm,
                y: y / norm,
                z: z / norm,
            }
        }
    }

    #[inline]
    pub fn x(&self) -> f64 {
        self.x
    }

    #[inline]
    pub fn y(&self) -> f64 {
        self.y
    }

    #[inline]
    pub fn z(&self) -> f64 {
        self.z
    }

    #[inline]
    pub fn to_array(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn to_vector(&self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }

    #[inline]
    pub fn dot(&self, other: &Self) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    /// Geodesic (arc-length) distance in radians.
    ///
    /// Computed as `atan2(‖a × b‖, a · b)`, which stays accurate for nearly
    /// parallel vectors where `arccos` of the dot product loses all digits.
    #[inline]
    pub fn angle_to(&self, other: &Self) -> f64 {
        let cx = self.y * other.z - self.z * other.y;
        let cy = self.z * other.x - self.x * other.z;
        let cz = self.x * other.y - self.y * other.x;
        (cx * cx + cy * cy + cz * cz).sqrt().atan2(self.dot(other))
    }
}

impl Neg for UnitVector3 {
    type Output = Self;

    fn neg(self) -> Self {
        Self {
            x: -self.x,
            y: -self.y,
            z: -self.z,
        }
    }
}

impl fmt::Display for UnitVector3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{}", self.x, self.y, self.z)
    }
}

#[inline]
pub(crate) fn clamped_acos(c: f64) -> f64 {
    c.clamp(-1.0, 1.0).acos()
}

/// Co-latitude `theta ∈ [0, π]` and longitude `phi ∈ [0, 2π)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Spherical {
    pub theta: f64,
    pub phi: f64,
}

impl Spherical {
    /// Longitude is canonicalised to 0 at the poles.
    pub fn from_unit(v: &UnitVector3) -> Self {
        let theta = clamped_acos(v.z);
        let phi = if v.x.hypot(v.y) <= MIN_NORM {
            0.0
        } else {
            let p = v.y.atan2(v.x);
            if p < 0.0 {
                // p + TAU can round up to TAU itself for tiny negative p
                let wrapped = p + TAU;
                if wrapped >= TAU {
                    0.0
                } else {
                    wrapped
                }
            } else {
                p
            }
        };
        Self { theta, phi }
    }

    pub fn to_unit(&self) -> UnitVector3 {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.phi.sin_cos();
        UnitVector3::from_unit_parts(st * cp, st * sp, ct)
    }
}

/// A proper rotation of R³.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rotation3(NaRotation3<f64>);

impl Rotation3 {
    pub fn identity() -> Self {
        Self(NaRotation3::identity())
    }

    /// Right-handed rotation by `angle` radians about `axis`.
    pub fn from_axis_angle(axis: &UnitVector3, angle: f64) -> Self {
        Self(NaRotation3::from_axis_angle(
            &Unit::new_unchecked(axis.to_vector()),
            angle,
        ))
    }

    /// Accepts a matrix with `RᵀR = I` and `det R = 1` to within 1e-9.
    pub fn from_matrix(m: [[f64; 3]; 3]) -> Result<Self, SphereError> {
        let mat = Matrix3::from_fn(|r, c| m[r][c]);
        let r = Self(NaRotation3::from_matrix_unchecked(mat));
        if r.is_proper(1e-9) {
            Ok(r)
        } else {
            Err(SphereError::NotARotation)
        }
    }

    pub fn matrix(&self) -> [[f64; 3]; 3] {
        let m = self.0.matrix();
        [
            [m[(0, 0)], m[(0, 1)], m[(0, 2)]],
            [m[(1, 0)], m[(1, 1)], m[(1, 2)]],
            [m[(2, 0)], m[(2, 1)], m[(2, 2)]],
        ]
    }

    pub fn is_proper(&self, tol: f64) -> bool {
        let m = self.0.matrix();
        let gram = m.transpose() * m;
        (gram - Matrix3::identity()).amax() <= tol && (m.determinant() - 1.0).abs() <= tol
    }

    pub fn inverse(&self) -> Self {
        Self(self.0.inverse())
    }

    pub fn apply(&self, v: &UnitVector3) -> UnitVector3 {
        let r = self.0 * v.to_vector();
        UnitVector3::from_unit_parts(r.x, r.y, r.z)
    }
}

impl Mul for Rotation3 {
    type Output = Self;

    fn mul(self, rhs: Self) -> Self {
        Self(self.0 * rhs.0)
    }
}

/// The rotation taking `mu` to the north pole `(0, 0, 1)`.
///
/// Rotates about `mu × e_z` by `arccos(muᵀe_z)`; identity when `mu = e_z`
/// and a half-turn about `e_x` when `mu = -e_z`.
pub fn pole_rotation(mu: &UnitVector3) -> Rotation3 {
    let axis = Vector3::new(mu.y, -mu.x, 0.0);
    let len = axis.norm();
    if len <= AXIS_EPS {
        return if mu.z > 0.0 {
            Rotation3::identity()
        } else {
            Rotation3::from_axis_angle(&UnitVector3::E_X, PI)
        };
    }
    let axis = UnitVector3::from_unit_parts(axis.x / len, axis.y / len, 0.0);
    Rotation3::from_axis_angle(&axis, clamped_acos(mu.z))
}

/// Angular projection depth of a direction relative to a centre.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct DepthValue(f64);

impl DepthValue {
    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }
}

/// `(1 + xᵀμ) / 2`, clamped into `[0, 1]`.
///
/// The dot product is divided by `μᵀμ`, which is 1 up to round-off, so that
/// `x = μ` and `x = −μ` give exactly 1 and 0.
pub fn depth(x: &UnitVector3, mu: &UnitVector3) -> DepthValue {
    DepthValue(depth_value(x, mu))
}

#[inline]
pub(crate) fn depth_value(x: &UnitVector3, mu: &UnitVector3) -> f64 {
    ((1.0 + x.dot(mu) / mu.dot(mu)) * 0.5).clamp(0.0, 1.0)
}

/// Compares two depth values, treating differences up to
/// [`DEPTH_TIE_TOLERANCE`] as equal.
#[inline]
pub fn cmp_depth(a: f64, b: f64) -> Ordering {
    if (a - b).abs() <= DEPTH_TIE_TOLERANCE {
        Ordering::Equal
    } else if a < b {
        Ordering::Less
    } else {
        Ordering::Greater
    }
}

/// The depth-induced total order on S² for a fixed centre.
///
/// The primary key is the depth. Among directions of equal depth the one
/// with the smaller longitude about `mu` (measured after rotating `mu` to
/// the pole with [`pole_rotation`]) is the larger element. Remaining ties
/// between distinct vectors fall back to comparing Cartesian components.
#[derive(Clone, Copy, Debug)]
pub struct DepthOrdering {
    mu: UnitVector3,
    pole: Rotation3,
}

impl DepthOrdering {
    pub fn new(mu: UnitVector3) -> Self {
        Self {
            mu,
            pole: pole_rotation(&mu),
        }
    }

    #[inline]
    pub fn mu(&self) -> &UnitVector3 {
        &self.mu
    }

    #[inline]
    pub fn depth(&self, x: &UnitVector3) -> f64 {
        depth_value(x, &self.mu)
    }

    /// Spherical coordinates of `x` in the frame where `mu` is the pole.
    pub fn spherical(&self, x: &UnitVector3) -> Spherical {
        Spherical::from_unit(&self.pole.apply(x))
    }

    /// Inverse of [`DepthOrdering::spherical`].
    ///
    /// The poles map exactly onto `mu` and `-mu`.
    pub fn from_spherical(&self, s: Spherical) -> UnitVector3 {
        if s.theta == 0.0 {
            self.mu
        } else if s.theta == PI {
            -self.mu
        } else {
            self.pole.inverse().apply(&s.to_unit())
        }
    }

    pub fn compare(&self, a: &UnitVector3, b: &UnitVector3) -> Ordering {
        cmp_depth(self.depth(a), self.depth(b)).then_with(|| self.tie_cmp(a, b))
    }

    /// Order between two vectors already known to have tied depth.
    pub fn tie_cmp(&self, a: &UnitVector3, b: &UnitVector3) -> Ordering {
        if a == b {
            return Ordering::Equal;
        }
        let pa = self.spherical(a).phi;
        let pb = self.spherical(b).phi;
        // smaller longitude ranks higher
        pb.total_cmp(&pa)
            .then_with(|| a.x.total_cmp(&b.x))
            .then_with(|| a.y.total_cmp(&b.y))
            .then_with(|| a.z.total_cmp(&b.z))
    }
}

/// Total order of `a` and `b` by depth about `mu`, ties broken by longitude.
pub fn depth_order(a: &UnitVector3, b: &UnitVector3, mu: &UnitVector3) -> Ordering {
    DepthOrdering::new(*mu).compare(a, b)
}

/// Whether `|D(Ax; Aμ) − D(x; μ)| ≤ 1e-12`.
pub fn depth_rotation_invariance_check(x: &UnitVector3, mu: &UnitVector3, a: &Rotation3) -> bool {
    let rotated = depth_value(&a.apply(x), &a.apply(mu));
    (rotated - depth_value(x, mu)).abs() <= 1e-12
}

/// A vector written as `cos θ · μ + sin θ · w` with `w ⟂ μ`.
///
/// Moving along the great circle through `μ` and `x` only changes `θ`, so
/// the longitude about `μ` is preserved.
#[derive(Clone, Copy, Debug)]
pub(crate) struct GreatCircle {
    x: UnitVector3,
    mu: UnitVector3,
    theta: f64,
    away: [f64; 3],
}

impl GreatCircle {
    pub(crate) fn new(x: &UnitVector3, mu: &UnitVector3) -> Self {
        let c = x.dot(mu).clamp(-1.0, 1.0);
        let theta = c.acos();
        let r = [x.x - c * mu.x, x.y - c * mu.y, x.z - c * mu.z];
        let n = (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt();
        let away = if n <= AXIS_EPS {
            fallback_tangent(mu)
        } else {
            [r[0] / n, r[1] / n, r[2] / n]
        };
        Self {
            x: *x,
            mu: *mu,
            theta,
            away,
        }
    }

    fn at(&self, theta: f64) -> UnitVector3 {
        let (s, c) = theta.sin_cos();
        let m = &self.mu;
        let w = &self.away;
        UnitVector3::from_unit_parts(c * m.x + s * w[0], c * m.y + s * w[1], c * m.z + s * w[2])
    }

    /// Moves `alpha` radians toward `μ`, stopping exactly at `μ`.
    pub(crate) fn toward(&self, alpha: f64) -> UnitVector3 {
        if alpha == 0.0 {
            self.x
        } else if alpha >= self.theta {
            self.mu
        } else {
            self.at(self.theta - alpha)
        }
    }

    /// Moves `alpha` radians away from `μ`, stopping exactly at `−μ`.
    pub(crate) fn away(&self, alpha: f64) -> UnitVector3 {
        if alpha == 0.0 {
            self.x
        } else if alpha >= PI - self.theta {
            -self.mu
        } else {
            self.at(self.theta + alpha)
        }
    }
}

// Unit tangent at μ from Gram–Schmidt of the first basis vector not parallel to μ.
fn fallback_tangent(mu: &UnitVector3) -> [f64; 3] {
    let m = mu.to_array();
    let k = (0..3).find(|&k| 1.0 - m[k].abs() > 1e-9).unwrap_or(0);
    let mut e = [0.0; 3];
    e[k] = 1.0;
    let d = m[k];
    let r = [e[0] - d * m[0], e[1] - d * m[1], e[2] - d * m[2]];
    let n = (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt();
    [r[0] / n, r[1] / n, r[2] / n]
}

fn check_angle(alpha: f64) {
    assert!(
        alpha >= 0.0,
        "rotation angle must be non-negative, got {alpha}"
    );
}

/// Rotates `x` toward `mu` along their great circle by `min(alpha, θ)`,
/// where `θ` is the angle between them. Overshooting lands exactly on `mu`.
///
/// # Panics
/// If `alpha` is negative or NaN.
pub fn rotate_toward(x: &UnitVector3, mu: &UnitVector3, alpha: f64) -> UnitVector3 {
    check_angle(alpha);
    GreatCircle::new(x, mu).toward(alpha)
}

/// Rotates `x` away from `mu` by `min(alpha, π − θ)`; overshooting lands
/// exactly on `-mu`.
///
/// # Panics
/// If `alpha` is negative or NaN.
pub fn rotate_away(x: &UnitVector3, mu: &UnitVector3, alpha: f64) -> UnitVector3 {
    check_angle(alpha);
    GreatCircle::new(x, mu).away(alpha)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    fn v(x: f64, y: f64, z: f64) -> UnitVector3 {
        UnitVector3::new(x, y, z).unwrap()
    }

    fn close(a: &UnitVector3, b: &UnitVector3, tol: f64) -> bool {
        a.to_array()
            .iter()
            .zip(b.to_array())
            .all(|(p, q)| (p - q).abs() <= tol)
    }

    #[test]
    fn constructor_normalises_and_rejects_tiny() {
        let u = v(3.0, 0.0, 4.0);
        assert!((u.x() - 0.6).abs() < 1e-15 && (u.z() - 0.8).abs() < 1e-15);
        assert!(matches!(
            UnitVector3::new(1e-13, 0.0, 0.0),
            Err(SphereError::Degenerate(_))
        ));
        assert_eq!(
            UnitVector3::new(f64::NAN, 0.0, 1.0),
            Err(SphereError::NonFinite)
        );
        // already unit: stored unchanged
        let w = v(0.6, 0.0, 0.8);
        assert_eq!(UnitVector3::new(w.x(), w.y(), w.z()).unwrap(), w);
    }

    #[test]
    fn depth_examples() {
        let mu = v(0.2, -0.4, 0.9);
        assert_eq!(depth(&mu, &mu).value(), 1.0);
        assert_eq!(depth(&-mu, &mu).value(), 0.0);
        let perp = v(0.0, 0.9, 0.4);
        assert!((depth(&perp, &mu).value() - 0.5).abs() < 1e-15);
        assert_eq!(depth(&UnitVector3::E_X, &UnitVector3::E_Z).value(), 0.5);
    }

    #[test]
    fn spherical_round_trip_and_poles() {
        let s = Spherical {
            theta: 1.1,
            phi: 4.0,
        };
        let back = Spherical::from_unit(&s.to_unit());
        assert!((back.theta - 1.1).abs() < 1e-12 && (back.phi - 4.0).abs() < 1e-12);
        let north = Spherical::from_unit(&UnitVector3::E_Z);
        assert_eq!((north.theta, north.phi), (0.0, 0.0));
        let south = Spherical::from_unit(&-UnitVector3::E_Z);
        assert_eq!((south.theta, south.phi), (PI, 0.0));
    }

    #[test]
    fn pole_rotation_cases() {
        for mu in [
            UnitVector3::E_Z,
            -UnitVector3::E_Z,
            UnitVector3::E_X,
            v(0.3, -0.5, -0.8),
        ] {
            let r = pole_rotation(&mu);
            assert!(r.is_proper(1e-12));
            assert!(close(&r.apply(&mu), &UnitVector3::E_Z, 1e-12), "{mu:?}");
        }
        assert_eq!(pole_rotation(&UnitVector3::E_Z), Rotation3::identity());
    }

    #[test]
    fn rotate_examples() {
        let mu = UnitVector3::E_Z;
        let x = UnitVector3::E_X;
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert_eq!(rotate_toward(&x, &mu, 0.0), x);
        assert!(close(
            &rotate_toward(&x, &mu, FRAC_PI_4),
            &v(h, 0.0, h),
            1e-15
        ));
        assert!(close(
            &rotate_away(&x, &mu, FRAC_PI_4),
            &v(h, 0.0, -h),
            1e-15
        ));
        let x45 = v(1.0, 0.0, 1.0);
        assert_eq!(rotate_toward(&x45, &mu, PI), mu);
        let x135 = v(1.0, 0.0, -1.0);
        assert_eq!(rotate_away(&x135, &mu, FRAC_PI_2), -mu);
        assert_eq!(rotate_away(&x, &mu, 0.0), x);
    }

    #[test]
    fn degenerate_axes_are_deterministic() {
        let mu = v(0.0, 0.6, 0.8);
        assert_eq!(rotate_toward(&mu, &mu, 0.3), mu);
        assert_eq!(rotate_away(&-mu, &mu, 0.3), -mu);
        let a = rotate_away(&mu, &mu, 0.3);
        let b = rotate_away(&mu, &mu, 0.3);
        assert_eq!(a, b);
        assert!((a.angle_to(&mu) - 0.3).abs() < 1e-12);
        // first basis vector not parallel to μ is e_x
        assert!(a.x() > 0.0);
        let c = rotate_toward(&-mu, &mu, 0.5);
        assert!((c.angle_to(&mu) - (PI - 0.5)).abs() < 1e-12);
    }

    #[test]
    #[should_panic]
    fn negative_angle_panics() {
        rotate_toward(&UnitVector3::E_X, &UnitVector3::E_Z, -0.1);
    }

    #[test]
    fn depth_order_examples() {
        let mu = UnitVector3::E_Z;
        assert_eq!(depth_order(&mu, &-mu, &mu), Ordering::Greater);
        let a = Spherical {
            theta: 0.7,
            phi: 0.1,
        }
        .to_unit();
        let b = Spherical {
            theta: 0.7,
            phi: 0.3,
        }
        .to_unit();
        assert_eq!(depth_order(&a, &a, &mu), Ordering::Equal);
        assert_eq!(depth_order(&a, &b, &mu), Ordering::Greater);
        assert_eq!(depth_order(&b, &a, &mu), Ordering::Less);
    }

    #[test]
    fn tie_break_in_tilted_frame() {
        let mu = v(0.3, -0.2, 0.7);
        let ord = DepthOrdering::new(mu);
        let a = ord.from_spherical(Spherical {
            theta: 1.2,
            phi: 0.1,
        });
        let b = ord.from_spherical(Spherical {
            theta: 1.2,
            phi: 0.3,
        });
        assert_eq!(cmp_depth(ord.depth(&a), ord.depth(&b)), Ordering::Equal);
        assert_eq!(ord.compare(&a, &b), Ordering::Greater);
    }

    #[test]
    fn rotation_from_matrix_validates() {
        let good = Rotation3::from_axis_angle(&v(1.0, 2.0, 3.0), 0.7).matrix();
        assert!(Rotation3::from_matrix(good).is_ok());
        let reflection = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, -1.0]];
        assert_eq!(
            Rotation3::from_matrix(reflection),
            Err(SphereError::NotARotation)
        );
    }

    #[test]
    fn rotation_invariance_identity() {
        let x = v(0.1, 0.2, 0.3);
        let mu = v(-0.5, 0.1, 0.2);
        assert!(depth_rotation_invariance_check(
            &x,
            &mu,
            &Rotation3::identity()
        ));
    }
}
