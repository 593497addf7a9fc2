//! Numerical checks of the stability results: equilibria of the unforced
//! attitude error system and their linearizations, escape from the undesired
//! equilibria, decay envelopes, and a direct integrator of the error dynamics
//! that serves as an oracle for the measurement-driven observers.

use std::convert::Infallible;

use nalgebra::Complex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom3::{
    angle_axis, psi, rotation_distance, rotation_distance_sq, symmetric_eigen, GeomError, Mat3,
    RotationMatrix, Vec3,
};
use crate::network::{projector_sum, AgentId, Topology};
use crate::observers::{f_term, project_out, Gains};
use crate::ode::{Integrator, LieState, Tangent};
use crate::world::{inertial_bearing, WorldError};

/// Largest `‖ψ(M R̃)‖` accepted as an equilibrium by [`linearize_unforced`].
pub const EQUILIBRIUM_TOL: f64 = 1e-10;
/// Central-difference step for the Jacobian, in exponential coordinates.
pub const JACOBIAN_STEP: f64 = 1e-6;
/// Default slack for the ISS differential inequality.
pub const ISS_SLACK: f64 = 1e-3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("M has eigenvalues {values:?} with gap {gap:e} ≤ {required:e}; its equilibria are not isolated")]
    RepeatedEigenvalues {
        values: [f64; 3],
        gap: f64,
        required: f64,
    },
    #[error("not an equilibrium: ‖ψ(M R̃)‖ = {0:e}")]
    NotAnEquilibrium(f64),
    #[error("M is not symmetric positive semi-definite")]
    NotPsd,
    #[error(transparent)]
    Geom(#[from] GeomError),
    #[error(transparent)]
    World(#[from] WorldError),
}

/// Body rate of the unforced error system `Ṙ̃ = −2k_R R̃[ψ(M R̃)]^×`.
pub fn unforced_rate(m: &Mat3, k_r: f64, r: &RotationMatrix) -> Vec3 {
    -2.0 * k_r * psi(&(m * r.matrix()))
}

/// `‖ψ(M R̃)‖`; zero exactly on the equilibrium set.
pub fn field_residual(m: &Mat3, r: &RotationMatrix) -> f64 {
    psi(&(m * r.matrix())).norm()
}

/// `L = ¼ tr(M (I − R̃))`.
pub fn lyapunov(m: &Mat3, r: &RotationMatrix) -> f64 {
    0.25 * (m * (Mat3::identity() - r.matrix())).trace()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Isolation {
    /// Reject `M` unless its eigenvalues are pairwise separated.
    Strict,
    /// Accept repeated eigenvalues, enumerating π-rotations about one
    /// orthonormal eigenbasis; the result is flagged as not isolated.
    Relaxed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EquilibriumKind {
    Desired,
    Undesired { axis: [f64; 3], eigenvalue: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Equilibrium {
    pub kind: EquilibriumKind,
    #[serde(with = "rotation_rows")]
    pub rotation: RotationMatrix,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumSet {
    pub agent: AgentId,
    /// Whether the eigenvalues of `M` are distinct, i.e. the points are isolated.
    pub isolated: bool,
    pub points: Vec<Equilibrium>,
}

mod rotation_rows {
    use super::RotationMatrix;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(r: &RotationMatrix, s: S) -> Result<S::Ok, S::Error> {
        let m = r.matrix();
        let rows: [[f64; 3]; 3] =
            std::array::from_fn(|i| std::array::from_fn(|j| m[(i, j)]));
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<RotationMatrix, D::Error> {
        let rows = <[[f64; 3]; 3]>::deserialize(d)?;
        let m = crate::geom3::Mat3::from_fn(|i, j| rows[i][j]);
        RotationMatrix::new(m).map_err(serde::de::Error::custom)
    }
}

/// `{I} ∪ {R_α(π, v) : v a unit eigenvector of M}`.
pub fn enumerate_equilibria(
    agent: AgentId,
    m: &Mat3,
    gap: f64,
    isolation: Isolation,
) -> Result<EquilibriumSet, AnalysisError> {
    if (m - m.transpose()).abs().max() > 1e-12 * (1.0 + m.abs().max()) {
        return Err(AnalysisError::NotPsd);
    }
    let eig = symmetric_eigen(m);
    if eig.values[0] < -1e-12 * (1.0 + eig.values[2].abs()) {
        return Err(AnalysisError::NotPsd);
    }
    let isolated = eig.min_gap() > gap;
    if !isolated && isolation == Isolation::Strict {
        return Err(AnalysisError::RepeatedEigenvalues {
            values: eig.values,
            gap: eig.min_gap(),
            required: gap,
        });
    }
    let identity = RotationMatrix::identity();
    let mut points = vec![Equilibrium {
        kind: EquilibriumKind::Desired,
        rotation: identity,
        residual: field_residual(m, &identity),
    }];
    for (v, lambda) in eig.vectors.iter().zip(eig.values) {
        let rotation = angle_axis(std::f64::consts::PI, v)?;
        points.push(Equilibrium {
            kind: EquilibriumKind::Undesired {
                axis: [v.x, v.y, v.z],
                eigenvalue: lambda,
            },
            rotation,
            residual: field_residual(m, &rotation),
        });
    }
    Ok(EquilibriumSet {
        agent,
        isolated,
        points,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Linearization {
    /// `∂η̇/∂η` at `η = 0` for `R̃ = at · exp(η)`.
    pub jacobian: [[f64; 3]; 3],
    /// Real parts, ascending.
    pub eigenvalues: [f64; 3],
    /// Imaginary parts, in the same order.
    pub eigenvalues_im: [f64; 3],
    /// Unit eigenvector of the largest eigenvalue when that eigenvalue is positive.
    pub unstable_direction: Option<[f64; 3]>,
}

impl Linearization {
    pub fn max_real(&self) -> f64 {
        self.eigenvalues[2]
    }
}

fn jacobian(m: &Mat3, k_r: f64, at: &RotationMatrix) -> Mat3 {
    let mut j = Mat3::zeros();
    for c in 0..3 {
        let mut e = Vec3::zeros();
        e[c] = JACOBIAN_STEP;
        let plus = unforced_rate(m, k_r, &at.retract(&e));
        let minus = unforced_rate(m, k_r, &at.retract(&-e));
        j.set_column(c, &((plus - minus) / (2.0 * JACOBIAN_STEP)));
    }
    j
}

/// Linearizes the unforced error system at an equilibrium in exponential
/// coordinates, by central differences.
///
/// Near an equilibrium the right-trivialized field `w(at·exp(η))` is itself
/// `O(η)`, so its derivative at `η = 0` is the Jacobian of `η̇`.
pub fn linearize_unforced(
    m: &Mat3,
    k_r: f64,
    at: &RotationMatrix,
) -> Result<Linearization, AnalysisError> {
    let residual = field_residual(m, at);
    if residual > EQUILIBRIUM_TOL * (1.0 + m.abs().max()) {
        return Err(AnalysisError::NotAnEquilibrium(residual));
    }
    let j = jacobian(m, k_r, at);
    let mut eig: Vec<Complex<f64>> = j.complex_eigenvalues().iter().copied().collect();
    eig.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    let top = eig[2];
    let unstable_direction = (top.re > 0.0 && top.im == 0.0)
        .then(|| {
            // Kernel of J − λI: right singular vector of the smallest singular value.
            let svd = (j - Mat3::identity() * top.re).svd(false, true);
            let v_t = svd.v_t?;
            let k = svd.singular_values.imin();
            let v = v_t.row(k).transpose();
            Some([v.x, v.y, v.z])
        })
        .flatten();
    Ok(Linearization {
        jacobian: std::array::from_fn(|r| std::array::from_fn(|c| j[(r, c)])),
        eigenvalues: [eig[0].re, eig[1].re, eig[2].re],
        eigenvalues_im: [eig[0].im, eig[1].im, eig[2].im],
        unstable_direction,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EscapeSettings {
    pub perturbation: f64,
    pub radius: f64,
    pub horizon: f64,
    pub step: f64,
}

impl Default for EscapeSettings {
    fn default() -> Self {
        Self {
            perturbation: 1e-6,
            radius: 0.1,
            horizon: 60.0,
            step: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Escape {
    pub escaped: bool,
    /// First time the trajectory left the ball.
    pub time: Option<f64>,
    /// Largest distance from the equilibrium seen.
    pub max_distance: f64,
}

/// Starts the unforced system at `at · exp(ε d)` and reports when it leaves
/// the ball `|atᵀ R̃|_I < radius`.
pub fn escape_test(
    m: &Mat3,
    k_r: f64,
    at: &RotationMatrix,
    direction: &Vec3,
    settings: &EscapeSettings,
) -> Result<Escape, AnalysisError> {
    let d = crate::geom3::normalize(direction)?;
    let mut y = LieState {
        rotations: vec![at.retract(&(settings.perturbation * d))],
        vectors: vec![],
    };
    let steps = (settings.horizon / settings.step).ceil() as usize;
    let mut max_distance = 0.0f64;
    let mut field = |_t: f64, s: &LieState| {
        Ok::<_, Infallible>(Tangent {
            rotations: vec![unforced_rate(m, k_r, &s.rotations[0])],
            vectors: vec![],
        })
    };
    for k in 0..steps {
        let t = k as f64 * settings.step;
        y = match Integrator::Cf4.step(t, &y, settings.step, &mut field) {
            Ok(y) => y,
            Err(never) => match never {},
        };
        let dist = rotation_distance(&at.transpose().compose(&y.rotations[0]))?;
        max_distance = max_distance.max(dist);
        if dist >= settings.radius {
            return Ok(Escape {
                escaped: true,
                time: Some(t + settings.step),
                max_distance,
            });
        }
    }
    Ok(Escape {
        escaped: false,
        time: None,
        max_distance,
    })
}

/// One equilibrium with its linearization and, when unstable, the escape run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointVerdict {
    pub equilibrium: Equilibrium,
    pub linearization: Linearization,
    pub escape: Option<Escape>,
    /// Desired: every real part negative. Undesired: some real part above
    /// [`UNSTABLE_MARGIN`] and the perturbed trajectory escapes.
    pub as_expected: bool,
}

/// Smallest positive real part accepted as evidence of instability.
pub const UNSTABLE_MARGIN: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FollowerEquilibria {
    pub agent: AgentId,
    pub isolated: bool,
    pub points: Vec<PointVerdict>,
}

impl FollowerEquilibria {
    pub fn max_residual(&self) -> f64 {
        self.points
            .iter()
            .map(|p| p.equilibrium.residual)
            .fold(0.0, f64::max)
    }

    pub fn as_expected(&self) -> bool {
        self.points.iter().all(|p| p.as_expected)
    }
}

/// Enumerates, linearizes and perturbs every equilibrium of follower `agent`'s
/// unforced attitude error system.
pub fn analyze_equilibria(
    agent: AgentId,
    m: &Mat3,
    k_r: f64,
    gap: f64,
    isolation: Isolation,
    escape: &EscapeSettings,
) -> Result<FollowerEquilibria, AnalysisError> {
    let set = enumerate_equilibria(agent, m, gap, isolation)?;
    let mut points = Vec::with_capacity(set.points.len());
    for eq in set.points {
        let lin = linearize_unforced(m, k_r, &eq.rotation)?;
        let (escape, as_expected) = match eq.kind {
            EquilibriumKind::Desired => (None, lin.max_real() < 0.0),
            EquilibriumKind::Undesired { .. } => {
                let run = match lin.unstable_direction {
                    Some(d) => Some(escape_test(m, k_r, &eq.rotation, &Vec3::from(d), escape)?),
                    None => None,
                };
                let ok = lin.max_real() > UNSTABLE_MARGIN && run.is_some_and(|e| e.escaped);
                (run, ok)
            }
        };
        points.push(PointVerdict {
            equilibrium: eq,
            linearization: lin,
            escape,
            as_expected,
        });
    }
    Ok(FollowerEquilibria {
        agent,
        isolated: set.isolated,
        points,
    })
}

/// Closed-form error dynamics of the whole network, driven by true bearings.
#[derive(Debug, Clone)]
pub struct ErrorSystem {
    n: usize,
    gains: Gains,
    positions: Vec<Vec3>,
    /// Per follower: `(j, k_ij, b_ij)`.
    links: Vec<Vec<(AgentId, f64, Vec3)>>,
    /// Per follower: `M_i`.
    bearing_matrices: Vec<Mat3>,
}

impl ErrorSystem {
    pub fn new(
        topology: &Topology,
        positions: &[Vec3],
        gains: Gains,
    ) -> Result<Self, AnalysisError> {
        let mut links = Vec::new();
        let mut bearing_matrices = Vec::new();
        for i in topology.followers() {
            let mut list = Vec::new();
            let mut m = Mat3::zeros();
            for nb in topology.neighbors(i) {
                let b = inertial_bearing(positions, i, nb.id)?;
                m += nb.gain * b * b.transpose();
                list.push((nb.id, nb.gain, b));
            }
            links.push(list);
            bearing_matrices.push(m);
        }
        Ok(Self {
            n: topology.agent_count(),
            gains,
            positions: positions.to_vec(),
            links,
            bearing_matrices,
        })
    }

    pub fn follower_count(&self) -> usize {
        self.n - 2
    }

    /// `(R̃_j, p̃_j)` for any agent; leaders are exact.
    fn error_of(state: &LieState, j: AgentId) -> (RotationMatrix, Vec3) {
        if j.is_leader() {
            (RotationMatrix::identity(), Vec3::zeros())
        } else {
            (state.rotations[j.index() - 2], state.vectors[j.index() - 2])
        }
    }

    /// Rotations hold `R̃_3..R̃_n`, vectors hold `p̃_3..p̃_n`.
    pub fn field(&self, state: &LieState) -> Tangent {
        let mut rotations = Vec::with_capacity(self.follower_count());
        let mut vectors = Vec::with_capacity(self.follower_count());
        for f in 0..self.follower_count() {
            let ri = state.rotations[f];
            let pi = state.vectors[f];
            let mut g_sum = Vec3::zeros();
            let mut p_dot = Vec3::zeros();
            for &(j, k, b) in &self.links[f] {
                let (rj, pj) = Self::error_of(state, j);
                let g = (rj.rotate_inv(&b) - b).cross(&ri.rotate_inv(&b));
                g_sum += k * g;
                let fj = f_term(&pj, &rj, &ri, &self.positions[j.index()]);
                p_dot += project_out(&b, &(fj - pi));
            }
            let w = self.gains.k_r * (-2.0 * psi(&(self.bearing_matrices[f] * ri.matrix())) + g_sum);
            rotations.push(w);
            vectors.push(self.gains.k_p * p_dot);
        }
        Tangent { rotations, vectors }
    }
}

/// Sampled error trajectory; index `f` refers to follower `AgentId::from_index(f + 2)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ErrorTrajectory {
    pub times: Vec<f64>,
    pub rotations: Vec<Vec<RotationMatrix>>,
    pub positions: Vec<Vec<Vec3>>,
}

impl ErrorTrajectory {
    pub fn push(&mut self, t: f64, rotations: Vec<RotationMatrix>, positions: Vec<Vec3>) {
        self.times.push(t);
        self.rotations.push(rotations);
        self.positions.push(positions);
    }

    /// Largest entrywise rotation and position discrepancies over samples
    /// taken at matching times.
    pub fn sup_distance(&self, other: &ErrorTrajectory) -> (f64, f64) {
        let mut rot = 0.0f64;
        let mut pos = 0.0f64;
        let mut k = 0;
        for (a, t) in self.times.iter().enumerate() {
            while k < other.times.len() && other.times[k] < t - 1e-9 {
                k += 1;
            }
            if k == other.times.len() || (other.times[k] - t).abs() > 1e-9 {
                continue;
            }
            for (ra, rb) in self.rotations[a].iter().zip(&other.rotations[k]) {
                rot = rot.max((ra.matrix() - rb.matrix()).norm());
            }
            for (pa, pb) in self.positions[a].iter().zip(&other.positions[k]) {
                pos = pos.max((pa - pb).norm());
            }
        }
        (rot, pos)
    }
}

/// Integrates the error dynamics from the given follower errors.
pub fn integrate_error_dynamics(
    system: &ErrorSystem,
    rotations: Vec<RotationMatrix>,
    positions: Vec<Vec3>,
    horizon: f64,
    h: f64,
    stride: usize,
    integrator: Integrator,
) -> ErrorTrajectory {
    let steps = (horizon / h).round() as usize;
    let stride = stride.max(1);
    let mut y = LieState {
        rotations,
        vectors: positions,
    };
    let mut out = ErrorTrajectory::default();
    out.push(0.0, y.rotations.clone(), y.vectors.clone());
    let mut field = |_t: f64, s: &LieState| Ok::<_, Infallible>(system.field(s));
    for k in 1..=steps {
        y = match integrator.step((k - 1) as f64 * h, &y, h, &mut field) {
            Ok(y) => y,
            Err(never) => match never {},
        };
        if k % stride == 0 || k == steps {
            out.push(k as f64 * h, y.rotations.clone(), y.vectors.clone());
        }
    }
    out
}

/// Error-coordinate oracle for a scenario: `R̃_i(0) = R̂_i(0)ᵀ` (truth starts at
/// the identity) and `p̃_i(0) = p_i − R̃_i(0) p̂_i(0)`.
pub fn simulate_error_dynamics(
    scenario: &crate::sim::Scenario,
    horizon: f64,
    h: f64,
) -> Result<ErrorTrajectory, AnalysisError> {
    let system = ErrorSystem::new(&scenario.topology, &scenario.positions, scenario.gains)?;
    let (rotations, positions): (Vec<_>, Vec<_>) = scenario
        .topology
        .followers()
        .map(|i| {
            let e = scenario.initial[i.index()];
            let r_tilde = e.r_hat.transpose();
            (r_tilde, scenario.positions[i.index()] - r_tilde.rotate(&e.p_hat))
        })
        .unzip();
    Ok(integrate_error_dynamics(
        &system,
        rotations,
        positions,
        horizon,
        h,
        scenario.stride,
        scenario.integrator,
    ))
}

/// Measured quantity against a declared bound on a time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayEnvelope {
    pub agent: AgentId,
    pub times: Vec<f64>,
    pub measured: Vec<f64>,
    pub envelope: Vec<f64>,
    /// Least-squares slope of `−ln(measured)` against time, over positive samples.
    pub fitted_rate: Option<f64>,
    pub violations: usize,
    /// Largest `measured − envelope`.
    pub max_excess: f64,
}

impl DecayEnvelope {
    fn build(
        agent: AgentId,
        times: Vec<f64>,
        measured: Vec<f64>,
        envelope: Vec<f64>,
        slack: f64,
        fit: &[f64],
        fit_times: &[f64],
    ) -> Self {
        let mut violations = 0;
        let mut max_excess = f64::NEG_INFINITY;
        for (m, e) in measured.iter().zip(&envelope) {
            let excess = m - e;
            max_excess = max_excess.max(excess);
            if excess > slack {
                violations += 1;
            }
        }
        Self {
            agent,
            times,
            measured,
            envelope,
            fitted_rate: fitted_decay_rate(fit_times, fit),
            violations,
            max_excess,
        }
    }

    pub fn holds(&self) -> bool {
        self.violations == 0
    }
}

fn fitted_decay_rate(times: &[f64], values: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(values)
        .filter(|(_, v)| **v > 1e-12)
        .map(|(t, v)| (*t, v.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let (st, sy) = pts.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
    let (mt, my) = (st / n, sy / n);
    let (sxy, sxx) = pts.iter().fold((0.0, 0.0), |a, p| {
        (a.0 + (p.0 - mt) * (p.1 - my), a.1 + (p.0 - mt).powi(2))
    });
    (sxx > 0.0).then(|| -sxy / sxx)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IssForm {
    /// `−4k_R λ̲^Q (1 − x) x + √2 k_R Σ k_ij |R̃_j|_I` with `x = |R̃_i|²_I`.
    Tight,
    /// `−4k_R λ̲^Q x + 4k_R λ̲^Q + √2 k_R Σ k_ij |R̃_j|_I`.
    Relaxed,
}

/// Inputs for checking the ISS inequality of follower `agent` on sampled data.
#[derive(Debug, Clone, Copy)]
pub struct IssInputs<'a> {
    pub agent: AgentId,
    pub times: &'a [f64],
    /// `|R̃_i|_I` at each sample.
    pub own: &'a [f64],
    /// `(k_ij, |R̃_j|_I samples)` per neighbor; leaders contribute zeros.
    pub neighbors: &'a [(f64, Vec<f64>)],
    pub lambda_min_q: f64,
    pub k_r: f64,
}

/// Compares the central-difference derivative of `|R̃_i|²_I` with the right
/// side of the ISS inequality at interior samples.
pub fn iss_envelope_check(inputs: &IssInputs<'_>, form: IssForm, slack: f64) -> DecayEnvelope {
    let t = inputs.times;
    let x: Vec<f64> = inputs.own.iter().map(|r| r * r).collect();
    let mut times = Vec::new();
    let mut measured = Vec::new();
    let mut envelope = Vec::new();
    let kl = inputs.k_r * inputs.lambda_min_q;
    for k in 1..t.len().saturating_sub(1) {
        let derivative = (x[k + 1] - x[k - 1]) / (t[k + 1] - t[k - 1]);
        let input: f64 = inputs.neighbors.iter().map(|(g, r)| g * r[k]).sum();
        let forcing = std::f64::consts::SQRT_2 * inputs.k_r * input;
        let bound = match form {
            IssForm::Tight => -4.0 * kl * (1.0 - x[k]) * x[k] + forcing,
            IssForm::Relaxed => -4.0 * kl * x[k] + 4.0 * kl + forcing,
        };
        times.push(t[k]);
        measured.push(derivative);
        envelope.push(bound);
    }
    DecayEnvelope::build(inputs.agent, times, measured, envelope, slack, inputs.own, t)
}

/// `‖p̃_i(t)‖ ≤ factor · ‖p̃_i(0)‖ · exp(−rate · t)` at every sample.
pub fn ges_envelope_check(
    agent: AgentId,
    times: &[f64],
    norms: &[f64],
    rate: f64,
    factor: f64,
) -> DecayEnvelope {
    let n0 = norms.first().copied().unwrap_or(0.0);
    let envelope: Vec<f64> = times.iter().map(|t| factor * n0 * (-rate * t).exp()).collect();
    DecayEnvelope::build(
        agent,
        times.to_vec(),
        norms.to_vec(),
        envelope,
        0.0,
        norms,
        times,
    )
}

/// `k_p λ̲(Σ_{j∈N_i} P_{b_ij})`, the guaranteed decay rate of the unforced
/// position error of follower `i`.
pub fn position_decay_rate(
    i: AgentId,
    topology: &Topology,
    positions: &[Vec3],
    k_p: f64,
) -> Result<f64, AnalysisError> {
    let p = projector_sum(i, topology, positions)?;
    Ok(k_p * symmetric_eigen(&p).values[0])
}

/// `|R̃|²_I` helper re-exported for callers assembling ISS inputs.
pub fn squared_distance(r: &RotationMatrix) -> f64 {
    rotation_distance_sq(r)
}
