//! Joint time stepping of ground truth and the observers.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::ErrorTrajectory;
use crate::geom3::{rotation_distance_fro, RotationMatrix, Vec3};
use crate::network::{AgentId, Topology};
use crate::observers::{
    follower_rates, Estimate, FollowerRates, Gains, LocalInputs, NeighborPacket, ObserverError,
    ObserverState,
};
use crate::ode::{LieState, Tangent};
use crate::world::{body_bearing, BearingMeasurement, WorldError, WorldState};

use super::Scenario;

/// Any `‖p̂_i‖` above this aborts the run.
pub const DIVERGENCE_LIMIT: f64 = 1e6;
/// Final average attitude error required for convergence.
pub const ATTITUDE_THRESHOLD: f64 = 1e-4;
/// Final average position error required for convergence.
pub const POSITION_THRESHOLD: f64 = 1e-3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error(transparent)]
    Observer(#[from] ObserverError),
    #[error(transparent)]
    World(#[from] WorldError),
    #[error("estimate of agent {agent} diverged at t = {t}: ‖p̂‖ = {norm:e}")]
    Diverged { agent: AgentId, t: f64, norm: f64 },
}

/// The measurements and packets follower `i` receives, read off the world
/// and the broadcast estimates. Only `i`, its neighbors, and their estimates
/// are touched.
pub fn gather_local(
    i: AgentId,
    topology: &Topology,
    world: &WorldState,
    estimates: &ObserverState,
) -> Result<(Vec<BearingMeasurement>, Vec<NeighborPacket>), SimError> {
    let neighbors = topology.neighbors(i);
    let mut own = Vec::with_capacity(neighbors.len());
    let mut packets = Vec::with_capacity(neighbors.len());
    for nb in neighbors {
        own.push(body_bearing(world, i, nb.id)?);
        let e = estimates
            .get(nb.id)
            .ok_or(WorldError::UnknownAgent(nb.id))?;
        packets.push(NeighborPacket {
            sender: nb.id,
            r_hat: e.r_hat,
            p_hat: e.p_hat,
            bearing_to_receiver: body_bearing(world, nb.id, i)?.body_bearing,
        });
    }
    Ok((own, packets))
}

/// Rates of follower `i` given the world and the broadcast estimates.
pub fn follower_update(
    i: AgentId,
    topology: &Topology,
    gains: &Gains,
    world: &WorldState,
    estimates: &ObserverState,
    omega: Vec3,
) -> Result<FollowerRates, SimError> {
    let (own_bearings, packets) = gather_local(i, topology, world, estimates)?;
    let own = *estimates.get(i).ok_or(WorldError::UnknownAgent(i))?;
    Ok(follower_rates(
        &LocalInputs {
            agent: i,
            own,
            omega,
            neighbors: topology.neighbors(i),
            own_bearings: &own_bearings,
            packets: &packets,
        },
        gains,
    )?)
}

/// Per-follower error metrics at every sample.
///
/// `rerr` is `|R̃_i|_I`, `perr` is `‖p̃_i‖ = ‖p_i − R̃_i p̂_i‖`, and `phat_err`
/// is `‖p_i − p̂_i‖`. Averages run over followers only.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TimeSeries {
    pub followers: Vec<AgentId>,
    pub times: Vec<f64>,
    pub rerr: Vec<Vec<f64>>,
    pub perr: Vec<Vec<f64>>,
    pub phat_err: Vec<Vec<f64>>,
    pub rerr_avg: Vec<f64>,
    pub perr_avg: Vec<f64>,
    pub phat_err_avg: Vec<f64>,
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

impl TimeSeries {
    pub fn new(followers: Vec<AgentId>) -> Self {
        Self {
            followers,
            ..Default::default()
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn push(&mut self, t: f64, rerr: Vec<f64>, perr: Vec<f64>, phat_err: Vec<f64>) {
        self.times.push(t);
        self.rerr_avg.push(mean(&rerr));
        self.perr_avg.push(mean(&perr));
        self.phat_err_avg.push(mean(&phat_err));
        self.rerr.push(rerr);
        self.perr.push(perr);
        self.phat_err.push(phat_err);
    }

    /// Index of the sample closest to `t`.
    pub fn index_at(&self, t: f64) -> Option<usize> {
        (0..self.times.len()).min_by(|&a, &b| {
            (self.times[a] - t).abs().total_cmp(&(self.times[b] - t).abs())
        })
    }

    /// Samples of one follower's series, by column.
    pub fn column(series: &[Vec<f64>], follower: usize) -> Vec<f64> {
        series.iter().map(|row| row[follower]).collect()
    }

    pub fn follower_index(&self, id: AgentId) -> Option<usize> {
        self.followers.iter().position(|f| *f == id)
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub series: TimeSeries,
    /// `R̃_i`, `p̃_i` at the same samples as `series`.
    pub errors: ErrorTrajectory,
    pub world: WorldState,
    pub estimates: ObserverState,
    /// Largest `‖RᵀR − I‖_F` over truth and estimates at every sample.
    pub max_orthonormality_error: f64,
    pub steps: usize,
}

/// Layout of the integrator state: rotations `[R_1..R_n, R̂_3..R̂_n]`,
/// vectors `[p̂_3..p̂_n]`.
struct Layout<'a> {
    scenario: &'a Scenario,
    n: usize,
}

impl Layout<'_> {
    fn world(&self, t: f64, y: &LieState) -> WorldState {
        WorldState {
            t,
            positions: self.scenario.positions.clone(),
            attitudes: y.rotations[..self.n].to_vec(),
        }
    }

    fn estimates(&self, y: &LieState) -> ObserverState {
        let mut estimates = Vec::with_capacity(self.n);
        for k in 0..self.n {
            estimates.push(if k < 2 {
                Estimate {
                    r_hat: y.rotations[k],
                    p_hat: self.scenario.positions[k],
                }
            } else {
                Estimate {
                    r_hat: y.rotations[self.n + k - 2],
                    p_hat: y.vectors[k - 2],
                }
            });
        }
        ObserverState { estimates }
    }

    fn field(&self, t: f64, y: &LieState) -> Result<Tangent, SimError> {
        let world = self.world(t, y);
        let estimates = self.estimates(y);
        let omegas: Vec<Vec3> = self.scenario.omegas.iter().map(|s| s.eval(t)).collect();
        let mut rotations = omegas.clone();
        let mut vectors = Vec::with_capacity(self.n - 2);
        for i in self.scenario.topology.followers() {
            let r = follower_update(
                i,
                &self.scenario.topology,
                &self.scenario.gains,
                &world,
                &estimates,
                omegas[i.index()],
            )?;
            rotations.push(r.attitude);
            vectors.push(r.position);
        }
        Ok(Tangent { rotations, vectors })
    }

    fn sample(&self, t: f64, y: &LieState, series: &mut TimeSeries, errors: &mut ErrorTrajectory) -> f64 {
        let mut rerr = Vec::with_capacity(self.n - 2);
        let mut perr = Vec::with_capacity(self.n - 2);
        let mut phat = Vec::with_capacity(self.n - 2);
        let mut r_tilde = Vec::with_capacity(self.n - 2);
        let mut p_tilde = Vec::with_capacity(self.n - 2);
        for k in 2..self.n {
            let r = y.rotations[k];
            let r_hat = y.rotations[self.n + k - 2];
            let p = self.scenario.positions[k];
            let p_hat = y.vectors[k - 2];
            let rt = r.compose(&r_hat.transpose());
            let pt = p - rt.rotate(&p_hat);
            rerr.push(rotation_distance_fro(&rt));
            perr.push(pt.norm());
            phat.push((p - p_hat).norm());
            r_tilde.push(rt);
            p_tilde.push(pt);
        }
        series.push(t, rerr, perr, phat);
        errors.push(t, r_tilde, p_tilde);
        y.rotations
            .iter()
            .map(RotationMatrix::orthonormality_error)
            .fold(0.0, f64::max)
    }
}

/// Runs a scenario to its horizon.
pub fn run(scenario: &Scenario) -> Result<RunOutput, SimError> {
    run_with(scenario, scenario.step, scenario.horizon, scenario.stride)
}

/// Runs with explicit step, horizon and sample stride.
pub fn run_with(
    scenario: &Scenario,
    h: f64,
    horizon: f64,
    stride: usize,
) -> Result<RunOutput, SimError> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(WorldError::BadStep(h).into());
    }
    let n = scenario.agent_count();
    let layout = Layout { scenario, n };
    let mut rotations = vec![RotationMatrix::identity(); n];
    rotations.extend(scenario.initial[2..].iter().map(|e| e.r_hat));
    let mut y = LieState {
        rotations,
        vectors: scenario.initial[2..].iter().map(|e| e.p_hat).collect(),
    };
    let followers: Vec<AgentId> = scenario.topology.followers().collect();
    let mut series = TimeSeries::new(followers.clone());
    let mut errors = ErrorTrajectory::default();
    let mut max_orth = layout.sample(0.0, &y, &mut series, &mut errors);

    let steps = (horizon / h).round() as usize;
    let stride = stride.max(1);
    let mut field = |t: f64, s: &LieState| layout.field(t, s);
    for k in 1..=steps {
        let t0 = (k - 1) as f64 * h;
        y = scenario.integrator.step(t0, &y, h, &mut field)?;
        let t = k as f64 * h;
        for (f, p) in y.vectors.iter().enumerate() {
            let norm = p.norm();
            if norm.is_nan() || norm > DIVERGENCE_LIMIT {
                return Err(SimError::Diverged {
                    agent: followers[f],
                    t,
                    norm,
                });
            }
        }
        if k % stride == 0 || k == steps {
            max_orth = max_orth.max(layout.sample(t, &y, &mut series, &mut errors));
        }
    }
    let t_end = steps as f64 * h;
    Ok(RunOutput {
        world: layout.world(t_end, &y),
        estimates: layout.estimates(&y),
        series,
        errors,
        max_orthonormality_error: max_orth,
        steps,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FollowerSummary {
    pub agent: AgentId,
    pub rerr: f64,
    pub perr: f64,
    pub phat_err: f64,
    pub attitude_converged: bool,
    pub position_converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub scenario: String,
    pub config_hash: String,
    pub seed: u64,
    pub step: f64,
    pub horizon: f64,
    pub integrator: crate::ode::Integrator,
    pub final_time: f64,
    pub attitude_threshold: f64,
    pub position_threshold: f64,
    pub final_rerr_avg: f64,
    pub final_perr_avg: f64,
    pub final_phat_err_avg: f64,
    pub followers: Vec<FollowerSummary>,
    pub attitude_converged: bool,
    pub position_converged: bool,
    pub max_orthonormality_error: f64,
}

impl RunSummary {
    pub fn new(scenario: &Scenario, out: &RunOutput) -> Self {
        let s = &out.series;
        let last = s.len().saturating_sub(1);
        let followers = s
            .followers
            .iter()
            .enumerate()
            .map(|(f, agent)| FollowerSummary {
                agent: *agent,
                rerr: s.rerr[last][f],
                perr: s.perr[last][f],
                phat_err: s.phat_err[last][f],
                attitude_converged: s.rerr[last][f] < ATTITUDE_THRESHOLD,
                position_converged: s.perr[last][f] < POSITION_THRESHOLD,
            })
            .collect();
        Self {
            scenario: scenario.name.clone(),
            config_hash: scenario.config_hash(),
            seed: scenario.seed,
            step: scenario.step,
            horizon: scenario.horizon,
            integrator: scenario.integrator,
            final_time: s.times[last],
            attitude_threshold: ATTITUDE_THRESHOLD,
            position_threshold: POSITION_THRESHOLD,
            final_rerr_avg: s.rerr_avg[last],
            final_perr_avg: s.perr_avg[last],
            final_phat_err_avg: s.phat_err_avg[last],
            followers,
            attitude_converged: s.rerr_avg[last] < ATTITUDE_THRESHOLD,
            position_converged: s.perr_avg[last] < POSITION_THRESHOLD,
            max_orthonormality_error: out.max_orthonormality_error,
        }
    }

    pub fn converged(&self) -> bool {
        self.attitude_converged && self.position_converged
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom3::{exp_so3, symmetric_eigen, Mat3};
    use crate::network::projector_sum;

    fn exact_estimates(s: &Scenario) -> Vec<Estimate> {
        s.positions
            .iter()
            .map(|p| Estimate {
                r_hat: RotationMatrix::identity(),
                p_hat: *p,
            })
            .collect()
    }

    #[test]
    fn exact_start_stays_exact() {
        let base = Scenario::paper_sec5();
        let s = base.with_initial(exact_estimates(&base));
        let out = run_with(&s, 1e-3, 10.0, 50).unwrap();
        for series in [&out.series.rerr, &out.series.perr, &out.series.phat_err] {
            for row in series {
                assert!(row.iter().all(|&e| (0.0..=1e-9).contains(&e)), "{row:?}");
            }
        }
    }

    #[test]
    fn repeated_runs_are_bit_identical() {
        let s = Scenario::paper_sec5();
        let a = run_with(&s, 1e-3, 3.0, 7).unwrap();
        let b = run_with(&s, 1e-3, 3.0, 7).unwrap();
        assert_eq!(a.series, b.series);
        assert_eq!(a.estimates, b.estimates);
    }

    #[test]
    fn rotations_stay_orthonormal() {
        let out = run(&Scenario::paper_sec5()).unwrap();
        assert!(out.max_orthonormality_error <= 1e-9, "{}", out.max_orthonormality_error);
        assert_eq!(out.steps, 30_000);
        assert_eq!(out.series.len(), 3_001);
    }

    #[test]
    fn series_excludes_leaders() {
        let out = run_with(&Scenario::paper_sec5(), 1e-3, 0.01, 1).unwrap();
        let ids: Vec<usize> = out.series.followers.iter().map(|a| a.number()).collect();
        assert_eq!(ids, [3, 4, 5, 6, 7, 8]);
        assert!(out.series.rerr.iter().all(|row| row.len() == 6));
    }

    /// Poisons every agent that is neither `i` nor one of its neighbors and
    /// checks that `i`'s update does not change by a single bit.
    #[test]
    fn follower_update_reads_only_its_neighborhood() {
        let s = Scenario::paper_sec5();
        let n = s.agent_count();
        let attitudes: Vec<RotationMatrix> = (0..n)
            .map(|k| exp_so3(&Vec3::new(0.1 * k as f64, -0.2, 0.05 * k as f64)))
            .collect();
        let world = WorldState {
            t: 1.3,
            positions: s.positions.clone(),
            attitudes,
        };
        let estimates = ObserverState {
            estimates: s.initial.clone(),
        };
        let nan = f64::NAN;
        for i in s.topology.followers() {
            let omega = s.omegas[i.index()].eval(world.t);
            let clean = follower_update(i, &s.topology, &s.gains, &world, &estimates, omega).unwrap();
            let mut used = vec![i];
            used.extend(s.topology.neighbors(i).iter().map(|nb| nb.id));
            let mut w = world.clone();
            let mut e = estimates.clone();
            for k in (0..n).filter(|k| !used.iter().any(|u| u.index() == *k)) {
                w.positions[k] = Vec3::repeat(nan);
                w.attitudes[k] = RotationMatrix(Mat3::repeat(nan));
                e.estimates[k] = Estimate {
                    r_hat: RotationMatrix(Mat3::repeat(nan)),
                    p_hat: Vec3::repeat(nan),
                };
            }
            let dirty = follower_update(i, &s.topology, &s.gains, &w, &e, omega).unwrap();
            assert_eq!(clean, dirty, "agent {i}");
        }
    }

    /// With exact attitudes and only `p̂_i` perturbed, `p̃_i` solves
    /// `ṗ̃ = −k_p A p̃` for the constant `A = Σ P_b`.
    #[test]
    fn position_error_matches_linear_solution_and_faster_with_larger_gain() {
        let base = Scenario::paper_sec5();
        let offset = Vec3::new(0.7, -0.4, 0.9);
        for i in base.topology.followers() {
            let a = projector_sum(i, &base.topology, &base.positions).unwrap();
            let eig = symmetric_eigen(&a);
            let f = base.topology.followers().position(|x| x == i).unwrap();
            let mut initial = exact_estimates(&base);
            initial[i.index()].p_hat += offset;
            let mut runs = Vec::new();
            for k_p in [1.0, 2.0] {
                let mut s = base.with_initial(initial.clone());
                s.gains = Gains::new(1.0, k_p).unwrap();
                let out = run_with(&s, 1e-3, 4.0, 100).unwrap();
                for (t, row) in out.series.times.iter().zip(&out.series.perr) {
                    let exact: Vec3 = (0..3)
                        .map(|m| {
                            let v = eig.vectors[m];
                            (-k_p * eig.values[m] * t).exp() * v.dot(&offset) * v
                        })
                        .sum();
                    assert!((row[f] - exact.norm()).abs() < 1e-9, "agent {i} t {t}");
                }
                runs.push(TimeSeries::column(&out.series.perr, f));
            }
            for (slow, fast) in runs[0].iter().zip(&runs[1]) {
                assert!(*fast <= *slow + 1e-12);
            }
        }
    }

    #[test]
    fn divergence_guard_trips() {
        let base = Scenario::paper_sec5();
        let mut initial = exact_estimates(&base);
        initial[4].p_hat = Vec3::new(2e6, 0.0, 0.0);
        let err = run_with(&base.with_initial(initial), 1e-3, 1.0, 1).unwrap_err();
        assert!(matches!(err, SimError::Diverged { agent, .. } if agent.number() == 5));
    }

    #[test]
    fn rejects_bad_step() {
        assert!(run_with(&Scenario::paper_sec5(), 0.0, 1.0, 1).is_err());
    }

    #[test]
    fn summary_flags_follow_thresholds() {
        let base = Scenario::paper_sec5();
        let s = base.with_initial(exact_estimates(&base));
        let out = run_with(&s, 1e-3, 0.5, 10).unwrap();
        let summary = RunSummary::new(&s, &out);
        assert!(summary.converged());
        assert_eq!(summary.followers.len(), 6);
        assert_eq!(summary.config_hash, base.config_hash());
    }
}
