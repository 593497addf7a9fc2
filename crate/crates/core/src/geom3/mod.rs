//! Geometric primitives on R³ and SO(3).
//!
//! Vectors and matrices are plain `nalgebra` fixed-size types. Rotations are
//! wrapped in [`RotationMatrix`], which can only be built through a validating
//! or projecting constructor, so downstream code can rely on orthonormality.

mod eigen;

pub use eigen::{symmetric_eigen, SymmetricEigen};

use std::fmt;

use thiserror::Error;

/// Column vector in R³.
pub type Vec3 = nalgebra::Vector3<f64>;
/// 3×3 real matrix.
pub type Mat3 = nalgebra::Matrix3<f64>;

/// Orthonormality and determinant tolerance for [`RotationMatrix`].
pub const ROTATION_TOL: f64 = 1e-9;
/// Antisymmetry tolerance accepted by [`vex`].
pub const SKEW_TOL: f64 = 1e-9;
/// Unit-norm tolerance for rotation axes.
pub const UNIT_TOL: f64 = 1e-9;
/// Below this angle [`exp_so3`] switches to Taylor coefficients.
pub const SMALL_ANGLE: f64 = 1e-8;
/// Largest negative radicand that [`rotation_distance`] silently clamps.
pub const RADICAND_CLAMP: f64 = -1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeomError {
    #[error("matrix is not antisymmetric (max |S + Sᵀ| = {0:e})")]
    NotAntisymmetric(f64),
    #[error("rotation axis is not a unit vector (norm = {0})")]
    NonUnitAxis(f64),
    #[error("vector has zero length")]
    ZeroVector,
    #[error("input contains a non-finite value")]
    NonFinite,
    #[error("matrix is not a rotation (‖RᵀR − I‖_F = {orthonormality:e}, det = {det})")]
    NotARotation { orthonormality: f64, det: f64 },
    #[error("trace of I − R is negative beyond round-off ({0:e})")]
    NegativeRadicand(f64),
    #[error("cannot project a matrix with non-positive determinant ({0:e}) onto SO(3)")]
    NonPositiveDeterminant(f64),
}

pub type GeomResult<T> = Result<T, GeomError>;

fn all_finite(m: &Mat3) -> bool {
    m.iter().all(|x| x.is_finite())
}

/// `[v]^×`, the matrix with `skew(v) * y == v.cross(&y)`.
pub fn skew(v: &Vec3) -> Mat3 {
    Mat3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Inverse of [`skew`]. Rejects matrices that are not antisymmetric.
pub fn vex(s: &Mat3) -> GeomResult<Vec3> {
    if !all_finite(s) {
        return Err(GeomError::NonFinite);
    }
    let asym = (s + s.transpose()).abs().max();
    if asym > SKEW_TOL {
        return Err(GeomError::NotAntisymmetric(asym));
    }
    Ok(Vec3::new(s[(2, 1)], s[(0, 2)], s[(1, 0)]))
}

/// Projection onto so(3): `(A − Aᵀ) / 2`.
pub fn pa(a: &Mat3) -> Mat3 {
    (a - a.transpose()) * 0.5
}

/// `vex(pa(C))`, evaluated directly from the off-diagonal entries.
pub fn psi(c: &Mat3) -> Vec3 {
    0.5 * Vec3::new(
        c[(2, 1)] - c[(1, 2)],
        c[(0, 2)] - c[(2, 0)],
        c[(1, 0)] - c[(0, 1)],
    )
}

/// `a bᵀ`.
pub fn outer(a: &Vec3, b: &Vec3) -> Mat3 {
    a * b.transpose()
}

/// `P_x = I − x xᵀ / ‖x‖²`, the projector onto the plane orthogonal to `x`.
pub fn orthogonal_projector(x: &Vec3) -> GeomResult<Mat3> {
    if !x.iter().all(|c| c.is_finite()) {
        return Err(GeomError::NonFinite);
    }
    let n2 = x.norm_squared();
    if n2 == 0.0 {
        return Err(GeomError::ZeroVector);
    }
    Ok(Mat3::identity() - outer(x, x) / n2)
}

/// Element of SO(3).
#[derive(Clone, Copy, PartialEq)]
pub struct RotationMatrix(pub(crate) Mat3);

impl fmt::Debug for RotationMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "RotationMatrix({:?})", self.0.as_slice())
    }
}

impl Default for RotationMatrix {
    fn default() -> Self {
        Self::identity()
    }
}

impl RotationMatrix {
    pub fn identity() -> Self {
        Self(Mat3::identity())
    }

    /// Validating constructor: `‖RᵀR − I‖_F ≤ 1e-9` and `|det R − 1| ≤ 1e-9`.
    pub fn new(m: Mat3) -> GeomResult<Self> {
        if !all_finite(&m) {
            return Err(GeomError::NonFinite);
        }
        let orthonormality = orthonormality_error(&m);
        let det = m.determinant();
        if orthonormality > ROTATION_TOL || (det - 1.0).abs() > ROTATION_TOL {
            return Err(GeomError::NotARotation {
                orthonormality,
                det,
            });
        }
        Ok(Self(m))
    }

    /// Projecting constructor; see [`project_to_rotation`].
    pub fn project(m: &Mat3) -> GeomResult<Self> {
        project_to_rotation(m)
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.0
    }

    pub fn into_inner(self) -> Mat3 {
        self.0
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    /// `self · other`.
    pub fn compose(&self, other: &Self) -> Self {
        Self(self.0 * other.0)
    }

    /// `R v`.
    pub fn rotate(&self, v: &Vec3) -> Vec3 {
        self.0 * v
    }

    /// `Rᵀ v`.
    pub fn rotate_inv(&self, v: &Vec3) -> Vec3 {
        self.0.tr_mul(v)
    }

    /// `R · exp([w]^×)`: right-multiplication by a body-frame increment.
    pub fn retract(&self, w: &Vec3) -> Self {
        Self(self.0 * exp_so3(w).0)
    }

    /// `‖RᵀR − I‖_F`.
    pub fn orthonormality_error(&self) -> f64 {
        orthonormality_error(&self.0)
    }
}

impl std::ops::Mul for RotationMatrix {
    type Output = RotationMatrix;

    fn mul(self, rhs: Self) -> Self {
        self.compose(&rhs)
    }
}

fn orthonormality_error(m: &Mat3) -> f64 {
    (m.tr_mul(m) - Mat3::identity()).norm()
}

/// `|R|_I = sqrt(tr(I − R) / 4)`, the normalized distance of `R` from the
/// identity, in [0, 1].
pub fn rotation_distance(r: &RotationMatrix) -> GeomResult<f64> {
    let radicand = 0.25 * (3.0 - r.0.trace());
    if radicand >= 0.0 {
        Ok(radicand.min(1.0).sqrt())
    } else if radicand >= RADICAND_CLAMP {
        Ok(0.0)
    } else {
        Err(GeomError::NegativeRadicand(radicand))
    }
}

/// `|R|_I` evaluated as `‖I − R‖_F / (2√2)`. Equal to [`rotation_distance`] on
/// SO(3), but keeps full relative precision near the identity, where the
/// trace form loses everything below about 1e-8.
pub fn rotation_distance_fro(r: &RotationMatrix) -> f64 {
    (Mat3::identity() - r.0).norm() / (2.0 * std::f64::consts::SQRT_2)
}

/// `|R|²_I` without the square root.
pub fn rotation_distance_sq(r: &RotationMatrix) -> f64 {
    (0.25 * (3.0 - r.0.trace())).clamp(0.0, 1.0)
}

/// `R_α(θ, v) = I + sin θ [v]^× + (1 − cos θ)([v]^×)²` for a unit axis `v`.
pub fn angle_axis(theta: f64, axis: &Vec3) -> GeomResult<RotationMatrix> {
    if !theta.is_finite() || !axis.iter().all(|c| c.is_finite()) {
        return Err(GeomError::NonFinite);
    }
    let norm = axis.norm();
    if (norm - 1.0).abs() > UNIT_TOL {
        return Err(GeomError::NonUnitAxis(norm));
    }
    let k = skew(axis);
    Ok(RotationMatrix(
        Mat3::identity() + theta.sin() * k + (1.0 - theta.cos()) * (k * k),
    ))
}

/// Exponential map so(3) → SO(3) (Rodrigues).
pub fn exp_so3(w: &Vec3) -> RotationMatrix {
    let theta2 = w.norm_squared();
    let theta = theta2.sqrt();
    // a = sin θ / θ, b = (1 − cos θ) / θ²
    let (a, b) = if theta < SMALL_ANGLE {
        (1.0 - theta2 / 6.0, 0.5 - theta2 / 24.0)
    } else {
        let half = (0.5 * theta).sin() / theta;
        (theta.sin() / theta, 2.0 * half * half)
    };
    let k = skew(w);
    RotationMatrix(Mat3::identity() + a * k + b * (k * k))
}

/// Nearest rotation in Frobenius norm: the orthogonal polar factor of `m`,
/// computed by Newton's iteration `X ← (X + X⁻ᵀ) / 2`.
pub fn project_to_rotation(m: &Mat3) -> GeomResult<RotationMatrix> {
    if !all_finite(m) {
        return Err(GeomError::NonFinite);
    }
    let det = m.determinant();
    let scale = m.norm().powi(3).max(f64::MIN_POSITIVE);
    if det <= 1e-12 * scale {
        return Err(GeomError::NonPositiveDeterminant(det));
    }
    let mut x = *m;
    for _ in 0..100 {
        let inv_t = match x.try_inverse() {
            Some(inv) => inv.transpose(),
            None => return Err(GeomError::NonPositiveDeterminant(x.determinant())),
        };
        let next = 0.5 * (x + inv_t);
        let delta = (next - x).norm();
        x = next;
        if delta <= 1e-15 {
            break;
        }
    }
    RotationMatrix::new(x)
}

/// Unit vector along `x`.
pub fn normalize(x: &Vec3) -> GeomResult<Vec3> {
    let n = x.norm();
    if !n.is_finite() {
        return Err(GeomError::NonFinite);
    }
    if n == 0.0 {
        return Err(GeomError::ZeroVector);
    }
    Ok(x / n)
}

/// A unit vector orthogonal to the unit vector `u`.
pub fn any_orthogonal(u: &Vec3) -> Vec3 {
    let pick = if u.x.abs() <= u.y.abs() && u.x.abs() <= u.z.abs() {
        Vec3::x()
    } else if u.y.abs() <= u.z.abs() {
        Vec3::y()
    } else {
        Vec3::z()
    };
    let v = u.cross(&pick);
    v / v.norm()
}
