//! Closed-form eigendecomposition of symmetric 3×3 matrices.
//!
//! Eigenvalues come from the trigonometric solution of the characteristic
//! cubic. The eigenvector of the most isolated eigenvalue is taken from a
//! cross product of two rows of `A − λI`; the remaining pair is resolved by an
//! exact 2×2 Jacobi rotation inside the orthogonal complement, which keeps the
//! basis orthonormal even when two eigenvalues coincide.

use std::f64::consts::PI;

use super::{any_orthogonal, Mat3, Vec3};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymmetricEigen {
    /// Ascending.
    pub values: [f64; 3],
    /// Unit eigenvectors, `vectors[k]` paired with `values[k]`; mutually orthogonal.
    pub vectors: [Vec3; 3],
}

impl SymmetricEigen {
    /// Smallest gap between consecutive eigenvalues.
    pub fn min_gap(&self) -> f64 {
        (self.values[1] - self.values[0]).min(self.values[2] - self.values[1])
    }
}

fn cubic_roots(a: &Mat3) -> [f64; 3] {
    let p1 = a[(0, 1)].powi(2) + a[(0, 2)].powi(2) + a[(1, 2)].powi(2);
    let q = a.trace() / 3.0;
    let p2 = (a[(0, 0)] - q).powi(2) + (a[(1, 1)] - q).powi(2) + (a[(2, 2)] - q).powi(2)
        + 2.0 * p1;
    if p2 == 0.0 {
        return [q, q, q];
    }
    let p = (p2 / 6.0).sqrt();
    let b = (a - Mat3::identity() * q) / p;
    let r = (b.determinant() / 2.0).clamp(-1.0, 1.0);
    let phi = r.acos() / 3.0;
    let largest = q + 2.0 * p * phi.cos();
    let smallest = q + 2.0 * p * (phi + 2.0 * PI / 3.0).cos();
    let middle = 3.0 * q - largest - smallest;
    let mut v = [smallest, middle, largest];
    v.sort_by(f64::total_cmp);
    v
}

/// Unit vector spanning the kernel of the rank-2 matrix `a − λI`.
fn kernel_vector(a: &Mat3, lambda: f64) -> Option<Vec3> {
    let shifted = a - Mat3::identity() * lambda;
    let rows = [
        shifted.row(0).transpose(),
        shifted.row(1).transpose(),
        shifted.row(2).transpose(),
    ];
    let candidates = [
        rows[0].cross(&rows[1]),
        rows[0].cross(&rows[2]),
        rows[1].cross(&rows[2]),
    ];
    let best = candidates
        .iter()
        .max_by(|x, y| x.norm_squared().total_cmp(&y.norm_squared()))?;
    let n = best.norm();
    (n > 0.0 && n.is_finite()).then(|| best / n)
}

/// Eigen-decomposes a symmetric matrix. Only the upper triangle is read.
pub fn symmetric_eigen(m: &Mat3) -> SymmetricEigen {
    let a = Mat3::new(
        m[(0, 0)],
        m[(0, 1)],
        m[(0, 2)],
        m[(0, 1)],
        m[(1, 1)],
        m[(1, 2)],
        m[(0, 2)],
        m[(1, 2)],
        m[(2, 2)],
    );
    let roots = cubic_roots(&a);
    let spread = roots[2] - roots[0];
    let scale = roots[0].abs().max(roots[2].abs()).max(f64::MIN_POSITIVE);
    if spread <= 1e-14 * scale {
        return SymmetricEigen {
            values: roots,
            vectors: [Vec3::x(), Vec3::y(), Vec3::z()],
        };
    }

    // The isolated eigenvalue is at least spread/2 away from the other two,
    // so `a − λI` has rank two there.
    let isolated_low = roots[1] - roots[0] > roots[2] - roots[1];
    let lambda = if isolated_low { roots[0] } else { roots[2] };
    let u = kernel_vector(&a, lambda).unwrap_or_else(Vec3::x);

    let e1 = any_orthogonal(&u);
    let e2 = u.cross(&e1);
    let a11 = e1.dot(&(a * e1));
    let a12 = e1.dot(&(a * e2));
    let a22 = e2.dot(&(a * e2));
    let theta = 0.5 * (2.0 * a12).atan2(a11 - a22);
    let (s, c) = theta.sin_cos();
    let w1 = c * e1 + s * e2;
    let w2 = -s * e1 + c * e2;
    let l1 = a11 * c * c + 2.0 * a12 * s * c + a22 * s * s;
    let l2 = a11 * s * s - 2.0 * a12 * s * c + a22 * c * c;

    let mut pairs = [(u.dot(&(a * u)), u), (l1, w1), (l2, w2)];
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
    SymmetricEigen {
        values: [pairs[0].0, pairs[1].0, pairs[2].0],
        vectors: [pairs[0].1, pairs[1].1, pairs[2].1],
    }
}
