//! Ground truth: fixed positions, attitudes rotating under `Ṙ = R[ω]^×`, and
//! synthesis of body-frame bearing measurements.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom3::{RotationMatrix, Vec3};
use crate::network::AgentId;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WorldError {
    #[error("agents {0} and {1} are collocated")]
    Collocated(AgentId, AgentId),
    #[error("a bearing from agent {0} to itself is undefined")]
    SelfBearing(AgentId),
    #[error("agent {0} is not part of this world")]
    UnknownAgent(AgentId),
    #[error("step must be positive and finite, got {0}")]
    BadStep(f64),
}

/// One additive term of an angular-velocity component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum SignalTerm {
    Const { amplitude: f64 },
    Sin { amplitude: f64, frequency: f64 },
    Cos { amplitude: f64, frequency: f64 },
}

impl SignalTerm {
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            SignalTerm::Const { amplitude } => amplitude,
            SignalTerm::Sin {
                amplitude,
                frequency,
            } => amplitude * (frequency * t).sin(),
            SignalTerm::Cos {
                amplitude,
                frequency,
            } => amplitude * (frequency * t).cos(),
        }
    }

    /// Upper bound on the term's magnitude.
    pub fn bound(&self) -> f64 {
        match *self {
            SignalTerm::Const { amplitude }
            | SignalTerm::Sin { amplitude, .. }
            | SignalTerm::Cos { amplitude, .. } => amplitude.abs(),
        }
    }

    fn is_finite(&self) -> bool {
        match *self {
            SignalTerm::Const { amplitude } => amplitude.is_finite(),
            SignalTerm::Sin {
                amplitude,
                frequency,
            }
            | SignalTerm::Cos {
                amplitude,
                frequency,
            } => amplitude.is_finite() && frequency.is_finite(),
        }
    }
}

/// Body-frame angular velocity as a sum of constant and sinusoidal terms per axis.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OmegaSignal {
    #[serde(default)]
    pub x: Vec<SignalTerm>,
    #[serde(default)]
    pub y: Vec<SignalTerm>,
    #[serde(default)]
    pub z: Vec<SignalTerm>,
}

impl OmegaSignal {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(w: Vec3) -> Self {
        let term = |a: f64| vec![SignalTerm::Const { amplitude: a }];
        Self {
            x: term(w.x),
            y: term(w.y),
            z: term(w.z),
        }
    }

    pub fn eval(&self, t: f64) -> Vec3 {
        let sum = |terms: &[SignalTerm]| terms.iter().map(|term| term.eval(t)).sum::<f64>();
        Vec3::new(sum(&self.x), sum(&self.y), sum(&self.z))
    }

    /// Per-axis bound `Σ |amplitude|`; finite whenever all amplitudes are.
    pub fn bound(&self) -> Vec3 {
        let sum = |terms: &[SignalTerm]| terms.iter().map(SignalTerm::bound).sum::<f64>();
        Vec3::new(sum(&self.x), sum(&self.y), sum(&self.z))
    }

    pub fn is_finite(&self) -> bool {
        self.x
            .iter()
            .chain(&self.y)
            .chain(&self.z)
            .all(SignalTerm::is_finite)
    }
}

/// `ω(t)`, the componentwise sum of the signal terms.
pub fn eval_omega(signal: &OmegaSignal, t: f64) -> Vec3 {
    signal.eval(t)
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldState {
    pub t: f64,
    /// Indexed by `AgentId::index()`; never modified by stepping.
    pub positions: Vec<Vec3>,
    pub attitudes: Vec<RotationMatrix>,
}

impl WorldState {
    /// All attitudes at the identity at `t = 0`.
    pub fn new(positions: Vec<Vec3>) -> Self {
        let attitudes = vec![RotationMatrix::identity(); positions.len()];
        Self {
            t: 0.0,
            positions,
            attitudes,
        }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn position(&self, id: AgentId) -> Result<&Vec3, WorldError> {
        self.positions
            .get(id.index())
            .ok_or(WorldError::UnknownAgent(id))
    }

    pub fn attitude(&self, id: AgentId) -> Result<&RotationMatrix, WorldError> {
        self.attitudes
            .get(id.index())
            .ok_or(WorldError::UnknownAgent(id))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BearingMeasurement {
    pub from: AgentId,
    pub to: AgentId,
    /// `b_ij^i = R_iᵀ b_ij`.
    pub body_bearing: Vec3,
}

/// `b_ij = (p_j − p_i) / ‖p_j − p_i‖`.
pub fn inertial_bearing(positions: &[Vec3], i: AgentId, j: AgentId) -> Result<Vec3, WorldError> {
    if i == j {
        return Err(WorldError::SelfBearing(i));
    }
    let pi = positions.get(i.index()).ok_or(WorldError::UnknownAgent(i))?;
    let pj = positions.get(j.index()).ok_or(WorldError::UnknownAgent(j))?;
    let d = pj - pi;
    let n = d.norm();
    if n == 0.0 || !n.is_finite() {
        return Err(WorldError::Collocated(i, j));
    }
    Ok(d / n)
}

/// Bearing to `j` as measured in agent `i`'s body frame.
pub fn body_bearing(
    world: &WorldState,
    i: AgentId,
    j: AgentId,
) -> Result<BearingMeasurement, WorldError> {
    let b = inertial_bearing(&world.positions, i, j)?;
    Ok(BearingMeasurement {
        from: i,
        to: j,
        body_bearing: world.attitude(i)?.rotate_inv(&b),
    })
}

/// Advances every attitude by `R ← R · exp(h ω(t + h/2))`. Positions are carried over
/// unchanged.
pub fn step_truth(
    world: &WorldState,
    signals: &[OmegaSignal],
    h: f64,
) -> Result<WorldState, WorldError> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(WorldError::BadStep(h));
    }
    let mid = world.t + 0.5 * h;
    let attitudes = world
        .attitudes
        .iter()
        .enumerate()
        .map(|(k, r)| {
            let w = signals.get(k).map_or_else(Vec3::zeros, |s| s.eval(mid));
            r.retract(&(h * w))
        })
        .collect();
    Ok(WorldState {
        t: world.t + h,
        positions: world.positions.clone(),
        attitudes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom3::{angle_axis, exp_so3, rotation_distance};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn id(k: usize) -> AgentId {
        AgentId::new(k).unwrap()
    }

    fn cos(amplitude: f64, frequency: f64) -> SignalTerm {
        SignalTerm::Cos {
            amplitude,
            frequency,
        }
    }

    fn sin(amplitude: f64, frequency: f64) -> SignalTerm {
        SignalTerm::Sin {
            amplitude,
            frequency,
        }
    }

    fn c(amplitude: f64) -> SignalTerm {
        SignalTerm::Const { amplitude }
    }

    #[test]
    fn omega_examples() {
        let w1 = OmegaSignal::constant(Vec3::new(1.0, -2.0, 1.0));
        for t in [0.0, 0.7, 13.0] {
            assert_eq!(w1.eval(t), Vec3::new(1.0, -2.0, 1.0));
        }
        let w2 = OmegaSignal {
            x: vec![cos(-1.0, 3.0)],
            y: vec![c(1.0)],
            z: vec![sin(1.0, 2.0)],
        };
        assert_eq!(eval_omega(&w2, 0.0), Vec3::new(-1.0, 1.0, 0.0));
        let t = 0.37f64;
        let expected = Vec3::new(-(3.0 * t).cos(), 1.0, (2.0 * t).sin());
        assert!((w2.eval(t) - expected).norm() < 1e-15);
        assert_eq!(OmegaSignal::zero().eval(5.0), Vec3::zeros());
        assert_eq!(w2.bound(), Vec3::new(1.0, 1.0, 1.0));
    }

    #[test]
    fn bearing_examples() {
        let p = vec![
            Vec3::zeros(),
            Vec3::new(2.0, 0.0, 0.0),
            Vec3::new(2.0, 2.0, 0.0),
        ];
        assert_eq!(inertial_bearing(&p, id(1), id(2)).unwrap(), Vec3::x());
        let b31 = inertial_bearing(&p, id(3), id(1)).unwrap();
        let h = 1.0 / 2f64.sqrt();
        assert!((b31 - Vec3::new(-h, -h, 0.0)).norm() < 1e-15);
        let same = vec![Vec3::zeros(), Vec3::zeros()];
        assert_eq!(
            inertial_bearing(&same, id(1), id(2)),
            Err(WorldError::Collocated(id(1), id(2)))
        );
        assert_eq!(
            inertial_bearing(&p, id(2), id(2)),
            Err(WorldError::SelfBearing(id(2)))
        );
    }

    #[test]
    fn body_bearing_with_identity_attitude() {
        let world = WorldState::new(vec![Vec3::zeros(), Vec3::new(0.0, 3.0, 4.0)]);
        let m = body_bearing(&world, id(1), id(2)).unwrap();
        assert_eq!(m.body_bearing, Vec3::new(0.0, 0.6, 0.8));
    }

    #[test]
    fn zero_rate_leaves_world_unchanged() {
        let world = WorldState::new(vec![Vec3::zeros(), Vec3::x()]);
        let next = step_truth(&world, &[OmegaSignal::zero(), OmegaSignal::zero()], 0.1).unwrap();
        assert_eq!(next.attitudes, world.attitudes);
        assert_eq!(next.positions, world.positions);
        assert!((next.t - 0.1).abs() < 1e-15);
        assert!(step_truth(&world, &[], 0.0).is_err());
    }

    #[test]
    fn constant_rate_matches_closed_form() {
        let mut world = WorldState::new(vec![Vec3::zeros()]);
        let signals = [OmegaSignal::constant(Vec3::z())];
        let steps = 31_416;
        let h = PI / steps as f64;
        for _ in 0..steps {
            world = step_truth(&world, &signals, h).unwrap();
        }
        let expected = angle_axis(PI, &Vec3::z()).unwrap();
        assert!((world.attitudes[0].matrix() - expected.matrix()).abs().max() <= 1e-6);
    }

    fn sec5_like_signal() -> OmegaSignal {
        OmegaSignal {
            x: vec![cos(-1.0, 5.0)],
            y: vec![c(1.0)],
            z: vec![sin(1.0, 9.0)],
        }
    }

    #[test]
    fn long_runs_stay_on_so3() {
        let positions = vec![Vec3::zeros(), Vec3::x()];
        let mut world = WorldState::new(positions.clone());
        let signals = [sec5_like_signal(), OmegaSignal::constant(Vec3::new(1.0, -2.0, 1.0))];
        for _ in 0..30_000 {
            world = step_truth(&world, &signals, 1e-3).unwrap();
        }
        for r in &world.attitudes {
            assert!(r.orthonormality_error() <= 1e-9);
        }
        assert_eq!(world.positions, positions);
    }

    #[test]
    fn midpoint_rule_is_second_order() {
        let signals = [sec5_like_signal()];
        let run = |h: f64| {
            let mut world = WorldState::new(vec![Vec3::zeros()]);
            let steps = (2.0 / h).round() as usize;
            for _ in 0..steps {
                world = step_truth(&world, &signals, h).unwrap();
            }
            world.attitudes[0]
        };
        let reference = run(1e-5);
        let err = |h: f64| {
            let r = run(h);
            rotation_distance(&r.transpose().compose(&reference)).unwrap()
        };
        let (coarse, fine) = (err(4e-3), err(2e-3));
        let ratio = coarse / fine;
        assert!((3.5..4.5).contains(&ratio), "ratio {ratio}");
    }

    proptest! {
        #[test]
        fn bearing_antisymmetry(a in prop::array::uniform3(-5.0f64..5.0), b in prop::array::uniform3(-5.0f64..5.0)) {
            let p = vec![Vec3::from(a), Vec3::from(b)];
            prop_assume!((p[0] - p[1]).norm() > 1e-6);
            let bij = inertial_bearing(&p, id(1), id(2)).unwrap();
            let bji = inertial_bearing(&p, id(2), id(1)).unwrap();
            prop_assert!((bij + bji).norm() <= 1e-15);
            prop_assert!((bij.norm() - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn body_bearing_is_rotated_inertial(
            a in prop::array::uniform3(-5.0f64..5.0),
            w in prop::array::uniform3(-3.0f64..3.0),
        ) {
            let mut world = WorldState::new(vec![Vec3::from(a), Vec3::new(0.5, -0.5, 7.0)]);
            world.attitudes[0] = exp_so3(&Vec3::from(w));
            let m = body_bearing(&world, id(1), id(2)).unwrap();
            prop_assert!((m.body_bearing.norm() - 1.0).abs() <= 1e-12);
            let b = inertial_bearing(&world.positions, id(1), id(2)).unwrap();
            prop_assert!((world.attitudes[0].rotate(&m.body_bearing) - b).norm() <= 1e-12);
        }
    }
}
