//! Explicit integrators on `SO(3)^m × (ℝ³)^k`.
//!
//! A state carries rotations that move by right-multiplied exponentials,
//! `Ṙ = R[w]^×` with body rate `w`, and ordinary vectors. Both schemes below
//! keep every rotation exactly orthonormal up to round-off.

use serde::{Deserialize, Serialize};

use crate::geom3::{RotationMatrix, Vec3};

#[derive(Debug, Clone, PartialEq)]
pub struct LieState {
    pub rotations: Vec<RotationMatrix>,
    pub vectors: Vec<Vec3>,
}

/// Body rates for the rotations and time derivatives for the vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Tangent {
    pub rotations: Vec<Vec3>,
    pub vectors: Vec<Vec3>,
}

impl Tangent {
    fn combine(parts: &[(f64, &Tangent)]) -> Tangent {
        let first = parts[0].1;
        let mut rotations = vec![Vec3::zeros(); first.rotations.len()];
        let mut vectors = vec![Vec3::zeros(); first.vectors.len()];
        for (c, t) in parts {
            for (acc, w) in rotations.iter_mut().zip(&t.rotations) {
                *acc += *c * w;
            }
            for (acc, v) in vectors.iter_mut().zip(&t.vectors) {
                *acc += *c * v;
            }
        }
        Tangent { rotations, vectors }
    }
}

impl LieState {
    /// `R ← R·exp(w)`, `v ← v + dv`.
    fn advance(&self, d: &Tangent) -> LieState {
        LieState {
            rotations: self
                .rotations
                .iter()
                .zip(&d.rotations)
                .map(|(r, w)| r.retract(w))
                .collect(),
            vectors: self.vectors.iter().zip(&d.vectors).map(|(v, dv)| v + dv).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    /// Geometric explicit midpoint: one half step to the midpoint, then a full
    /// exponential step with the midpoint rate. Second order.
    Midpoint,
    /// Fourth-order commutator-free Lie group method. Its vector part is the
    /// classical Runge–Kutta scheme.
    #[default]
    Cf4,
}

impl Integrator {
    pub fn order(self) -> u32 {
        match self {
            Integrator::Midpoint => 2,
            Integrator::Cf4 => 4,
        }
    }

    /// One step of size `h` from `(t, y)`.
    pub fn step<E>(
        self,
        t: f64,
        y: &LieState,
        h: f64,
        field: &mut impl FnMut(f64, &LieState) -> Result<Tangent, E>,
    ) -> Result<LieState, E> {
        match self {
            Integrator::Midpoint => {
                let k1 = field(t, y)?;
                let mid = y.advance(&Tangent::combine(&[(0.5 * h, &k1)]));
                let k2 = field(t + 0.5 * h, &mid)?;
                Ok(y.advance(&Tangent::combine(&[(h, &k2)])))
            }
            Integrator::Cf4 => {
                let k1 = field(t, y)?;
                let y2 = y.advance(&Tangent::combine(&[(0.5 * h, &k1)]));
                let k2 = field(t + 0.5 * h, &y2)?;
                let y3 = y.advance(&Tangent::combine(&[(0.5 * h, &k2)]));
                let k3 = field(t + 0.5 * h, &y3)?;
                let y4 = y2.advance(&Tangent::combine(&[(h, &k3), (-0.5 * h, &k1)]));
                let k4 = field(t + h, &y4)?;
                let c = h / 12.0;
                let first = Tangent::combine(&[(3.0 * c, &k1), (2.0 * c, &k2), (2.0 * c, &k3), (-c, &k4)]);
                let second = Tangent::combine(&[(-c, &k1), (2.0 * c, &k2), (2.0 * c, &k3), (3.0 * c, &k4)]);
                Ok(y.advance(&first).advance(&second))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom3::{exp_so3, Mat3};
    use std::convert::Infallible;

    // The trace-based distance bottoms out near 1e-8; compare entries instead.
    fn distance(a: &RotationMatrix, b: &RotationMatrix) -> f64 {
        (a.matrix() - b.matrix()).norm()
    }

    /// A rate of fixed direction and varying speed has a closed-form flow.
    #[test]
    fn fixed_axis_rate_matches_closed_form() {
        let axis = Vec3::new(1.0, 2.0, -0.5).normalize();
        // w(t) = (1 + sin t) axis ⇒ R(T) = exp((T + 1 − cos T) axis).
        let horizon = 2.0f64;
        let exact = exp_so3(&((horizon + 1.0 - horizon.cos()) * axis));
        for scheme in [Integrator::Midpoint, Integrator::Cf4] {
            let mut errs = Vec::new();
            for steps in [50usize, 100] {
                let h = horizon / steps as f64;
                let mut y = LieState {
                    rotations: vec![RotationMatrix::identity()],
                    vectors: vec![],
                };
                for k in 0..steps {
                    y = scheme
                        .step(k as f64 * h, &y, h, &mut |t, _| {
                            Ok::<_, Infallible>(Tangent {
                                rotations: vec![(1.0 + t.sin()) * axis],
                                vectors: vec![],
                            })
                        })
                        .unwrap();
                }
                errs.push(distance(&y.rotations[0], &exact));
            }
            let ratio = errs[0] / errs[1];
            let expected = 2f64.powi(scheme.order() as i32);
            assert!(
                ratio > 0.8 * expected && ratio < 1.25 * expected,
                "{scheme:?}: ratio {ratio}"
            );
        }
    }

    /// Nonlinear rotation–vector coupling; the order is read off step doubling.
    #[test]
    fn coupled_system_convergence_order() {
        let a = Mat3::new(0.2, -1.0, 0.3, 0.5, 0.1, -0.7, 0.0, 0.4, -0.2);
        let mut field = |t: f64, y: &LieState| {
            let r = y.rotations[0].matrix();
            let v = y.vectors[0];
            Ok::<_, Infallible>(Tangent {
                rotations: vec![r.transpose() * v + Vec3::new(t.cos(), 0.0, 1.0)],
                vectors: vec![a * v - r * Vec3::x()],
            })
        };
        let run = |scheme: Integrator, steps: usize, field: &mut dyn FnMut(f64, &LieState) -> Result<Tangent, Infallible>| {
            let h = 1.0 / steps as f64;
            let mut y = LieState {
                rotations: vec![RotationMatrix::identity()],
                vectors: vec![Vec3::new(0.3, -0.2, 0.9)],
            };
            for k in 0..steps {
                y = scheme.step(k as f64 * h, &y, h, &mut |t, s| field(t, s)).unwrap();
            }
            y
        };
        for scheme in [Integrator::Midpoint, Integrator::Cf4] {
            let coarse = run(scheme, 40, &mut field);
            let mid = run(scheme, 80, &mut field);
            let fine = run(scheme, 160, &mut field);
            let e1 = (coarse.vectors[0] - mid.vectors[0]).norm()
                + distance(&coarse.rotations[0], &mid.rotations[0]);
            let e2 = (mid.vectors[0] - fine.vectors[0]).norm()
                + distance(&mid.rotations[0], &fine.rotations[0]);
            let ratio = e1 / e2;
            let expected = 2f64.powi(scheme.order() as i32);
            assert!(
                ratio > 0.75 * expected && ratio < 1.33 * expected,
                "{scheme:?}: ratio {ratio}"
            );
            assert!(fine.rotations[0].orthonormality_error() < 1e-13);
        }
    }

    #[test]
    fn cf4_vector_part_is_classical_rk4() {
        // ẋ = t x (no rotations): RK4 tableau evaluated by hand for one step.
        let h = 0.3;
        let x0 = Vec3::new(1.0, -2.0, 0.5);
        let f = |t: f64, x: Vec3| t * x;
        let k1 = f(0.0, x0);
        let k2 = f(h / 2.0, x0 + h / 2.0 * k1);
        let k3 = f(h / 2.0, x0 + h / 2.0 * k2);
        let k4 = f(h, x0 + h * k3);
        let expected = x0 + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        let y = Integrator::Cf4
            .step(
                0.0,
                &LieState {
                    rotations: vec![],
                    vectors: vec![x0],
                },
                h,
                &mut |t, s| {
                    Ok::<_, Infallible>(Tangent {
                        rotations: vec![],
                        vectors: vec![t * s.vectors[0]],
                    })
                },
            )
            .unwrap();
        assert!((y.vectors[0] - expected).norm() < 1e-15);
    }

    #[test]
    fn midpoint_with_state_independent_rate_is_truth_step() {
        let w = |t: f64| Vec3::new(t.sin(), 1.0, -t);
        let r0 = exp_so3(&Vec3::new(0.1, 0.2, 0.3));
        let h = 0.01;
        let y = Integrator::Midpoint
            .step(
                0.5,
                &LieState {
                    rotations: vec![r0],
                    vectors: vec![],
                },
                h,
                &mut |t, _| {
                    Ok::<_, Infallible>(Tangent {
                        rotations: vec![w(t)],
                        vectors: vec![],
                    })
                },
            )
            .unwrap();
        assert_eq!(y.rotations[0], r0.retract(&(h * w(0.5 + h / 2.0))));
    }
}
