//! Leader–follower topology, its structural validation, and the per-follower
//! bearing matrices that govern the observers' equilibria and decay rates.
//!
//! Agents 1 and 2 are always the leaders. Every other agent is a follower whose
//! neighbor set `N_i` lists the agents it receives packets from.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom3::{outer, symmetric_eigen, Mat3, Vec3};
use crate::world::{inertial_bearing, WorldError};

/// Default minimum gap between consecutive eigenvalues of `M_i`.
pub const DEFAULT_EIGEN_GAP: f64 = 1e-6;

/// 1-based agent number.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub struct AgentId(usize);

impl AgentId {
    pub const LEADER_1: AgentId = AgentId(1);
    pub const LEADER_2: AgentId = AgentId(2);
    pub const LEADERS: [AgentId; 2] = [AgentId::LEADER_1, AgentId::LEADER_2];

    pub fn new(number: usize) -> Option<Self> {
        (number >= 1).then_some(Self(number))
    }

    /// From a 0-based index.
    pub fn from_index(index: usize) -> Self {
        Self(index + 1)
    }

    pub fn number(self) -> usize {
        self.0
    }

    /// 0-based index for slice access.
    pub fn index(self) -> usize {
        self.0 - 1
    }

    pub fn is_leader(self) -> bool {
        self.0 <= 2
    }
}

impl TryFrom<usize> for AgentId {
    type Error = String;

    fn try_from(value: usize) -> Result<Self, Self::Error> {
        AgentId::new(value).ok_or_else(|| "agent ids start at 1".to_string())
    }
}

impl From<AgentId> for usize {
    fn from(id: AgentId) -> usize {
        id.0
    }
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Debug for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// Neighbor `j` of some follower together with the edge gain `k_ij`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Neighbor {
    pub id: AgentId,
    pub gain: f64,
}

/// Errors raised while assembling a [`Topology`] from raw edges. Assumption
/// checks that need the whole graph live in [`validate_topology`].
#[derive(Debug, Error, Clone, PartialEq)]
pub enum TopologyError {
    #[error("a network needs the two leaders and at least one follower (got {0} agents)")]
    TooFewAgents(usize),
    #[error("edge ({0}, {1}) refers to an agent outside 1..={2}")]
    UnknownAgent(AgentId, AgentId, usize),
    #[error("edge ({0}, {1}) is listed twice")]
    DuplicateEdge(AgentId, AgentId),
    #[error("edge ({0}, {1}) is a self-loop")]
    SelfLoop(AgentId, AgentId),
    #[error("edge ({0}, {1}) has gain {2}; gains must be positive and finite")]
    NonPositiveGain(AgentId, AgentId, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    n: usize,
    /// `neighbors[i.index()]` is `N_i` in insertion order.
    neighbors: Vec<Vec<Neighbor>>,
}

impl Topology {
    /// Builds a topology from `(i, j, k_ij)` triples meaning `j ∈ N_i`.
    pub fn new(
        n: usize,
        edges: impl IntoIterator<Item = (AgentId, AgentId, f64)>,
    ) -> Result<Self, TopologyError> {
        if n < 3 {
            return Err(TopologyError::TooFewAgents(n));
        }
        let mut neighbors = vec![Vec::<Neighbor>::new(); n];
        for (i, j, gain) in edges {
            if i.number() > n || j.number() > n {
                return Err(TopologyError::UnknownAgent(i, j, n));
            }
            if i == j {
                return Err(TopologyError::SelfLoop(i, j));
            }
            if !(gain > 0.0 && gain.is_finite()) {
                return Err(TopologyError::NonPositiveGain(i, j, gain));
            }
            let list = &mut neighbors[i.index()];
            if list.iter().any(|nb| nb.id == j) {
                return Err(TopologyError::DuplicateEdge(i, j));
            }
            list.push(Neighbor { id: j, gain });
        }
        Ok(Self { n, neighbors })
    }

    pub fn agent_count(&self) -> usize {
        self.n
    }

    pub fn agents(&self) -> impl Iterator<Item = AgentId> {
        (0..self.n).map(AgentId::from_index)
    }

    pub fn followers(&self) -> impl Iterator<Item = AgentId> {
        (2..self.n).map(AgentId::from_index)
    }

    pub fn neighbors(&self, i: AgentId) -> &[Neighbor] {
        self.neighbors.get(i.index()).map_or(&[], Vec::as_slice)
    }

    pub fn edges(&self) -> impl Iterator<Item = (AgentId, Neighbor)> + '_ {
        self.neighbors.iter().enumerate().flat_map(|(k, list)| {
            list.iter().map(move |nb| (AgentId::from_index(k), *nb))
        })
    }

    /// Replaces every edge gain by `f(i, j, k_ij)`.
    pub fn map_gains(&self, mut f: impl FnMut(AgentId, AgentId, f64) -> f64) -> Self {
        let mut out = self.clone();
        for (k, list) in out.neighbors.iter_mut().enumerate() {
            for nb in list {
                nb.gain = f(AgentId::from_index(k), nb.id, nb.gain);
            }
        }
        out
    }

    /// The first `n` agents with their edges. Every edge of an agent `i ≤ n`
    /// must stay inside the prefix, which holds for any valid topology.
    pub fn prefix(&self, n: usize) -> Result<Self, TopologyError> {
        let n = n.min(self.n);
        let edges = self
            .edges()
            .filter(|(i, _)| i.number() <= n)
            .map(|(i, nb)| (i, nb.id, nb.gain));
        Topology::new(n, edges)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidationTolerances {
    /// Minimum separation between agents joined by an edge, in meters.
    pub collocation: f64,
    /// Minimum `‖b_ij × b_ik‖` for the best pair of a follower's bearings.
    pub collinearity: f64,
}

impl Default for ValidationTolerances {
    fn default() -> Self {
        Self {
            collocation: 1e-9,
            collinearity: 1e-9,
        }
    }
}

/// A violated clause of the leader–follower assumptions.
#[derive(Debug, Error, Clone, PartialEq, Serialize)]
#[serde(tag = "clause", rename_all = "snake_case")]
pub enum TopologyViolation {
    #[error("position missing for agent {agent}")]
    MissingPosition { agent: AgentId },
    #[error("graph is not acyclic: cycle through agents {agents:?}")]
    Cycle { agents: Vec<AgentId> },
    #[error("leader {leader} must have no neighbors")]
    LeaderHasNeighbors { leader: AgentId },
    #[error("follower {agent} has neighbor {neighbor}, but neighbors must be numbered below the agent")]
    NeighborNotLower { agent: AgentId, neighbor: AgentId },
    #[error("follower {agent} has {count} neighbor(s); at least two neighbors are required")]
    TooFewNeighbors { agent: AgentId, count: usize },
    #[error("leader {leader} has no directed path to follower {follower}")]
    LeaderUnreachable { leader: AgentId, follower: AgentId },
    #[error("agents {a} and {b} are collocated (distance {distance:e})")]
    Collocated { a: AgentId, b: AgentId, distance: f64 },
    #[error("follower {agent} has no pair of non-collinear bearings (best ‖b × b'‖ = {best:e})")]
    CollinearBearings { agent: AgentId, best: f64 },
}

impl TopologyViolation {
    /// Short stable name of the violated clause.
    pub fn clause(&self) -> &'static str {
        match self {
            Self::MissingPosition { .. } => "positions defined",
            Self::Cycle { .. } => "acyclic",
            Self::LeaderHasNeighbors { .. } => "leaders have no neighbors",
            Self::NeighborNotLower { .. } => "neighbors numbered below the agent",
            Self::TooFewNeighbors { .. } => "at least two neighbors",
            Self::LeaderUnreachable { .. } => "leaders reach every follower",
            Self::Collocated { .. } => "no collocated agents",
            Self::CollinearBearings { .. } => "two non-collinear bearings",
        }
    }
}

/// Kahn's algorithm over `i → j` for `j ∈ N_i`. Returns the agents left on a
/// cycle when no topological order exists.
fn find_cycle(t: &Topology) -> Option<Vec<AgentId>> {
    let n = t.n;
    let mut out_degree: Vec<usize> = t.neighbors.iter().map(Vec::len).collect();
    let mut dependents = vec![Vec::new(); n];
    for (i, nb) in t.edges() {
        dependents[nb.id.index()].push(i.index());
    }
    let mut queue: VecDeque<usize> = (0..n).filter(|&k| out_degree[k] == 0).collect();
    let mut removed = 0;
    while let Some(k) = queue.pop_front() {
        removed += 1;
        for &d in &dependents[k] {
            out_degree[d] -= 1;
            if out_degree[d] == 0 {
                queue.push_back(d);
            }
        }
    }
    if removed == n {
        return None;
    }
    // Walk forward inside the residual graph until a vertex repeats.
    let residual: Vec<bool> = out_degree.iter().map(|&d| d > 0).collect();
    let mut seen = vec![usize::MAX; n];
    let mut path = Vec::new();
    let mut k = (0..n).find(|&k| residual[k])?;
    loop {
        if seen[k] != usize::MAX {
            return Some(path[seen[k]..].iter().copied().map(AgentId::from_index).collect());
        }
        seen[k] = path.len();
        path.push(k);
        k = t.neighbors[k]
            .iter()
            .map(|nb| nb.id.index())
            .find(|&j| residual[j])?;
    }
}

fn reachable_from(t: &Topology, start: AgentId) -> BTreeSet<AgentId> {
    let mut seen = BTreeSet::from([start]);
    let mut queue = VecDeque::from([start]);
    while let Some(i) = queue.pop_front() {
        for nb in t.neighbors(i) {
            if seen.insert(nb.id) {
                queue.push_back(nb.id);
            }
        }
    }
    seen
}

/// Checks the leader–follower assumptions in a fixed order and reports the
/// first violated clause.
pub fn validate_topology(
    t: &Topology,
    positions: &[Vec3],
    tol: &ValidationTolerances,
) -> Result<(), TopologyViolation> {
    if positions.len() < t.n {
        return Err(TopologyViolation::MissingPosition {
            agent: AgentId::from_index(positions.len()),
        });
    }
    if let Some(agents) = find_cycle(t) {
        return Err(TopologyViolation::Cycle { agents });
    }
    for leader in AgentId::LEADERS {
        if !t.neighbors(leader).is_empty() {
            return Err(TopologyViolation::LeaderHasNeighbors { leader });
        }
    }
    for i in t.followers() {
        let list = t.neighbors(i);
        if let Some(nb) = list.iter().find(|nb| nb.id >= i) {
            return Err(TopologyViolation::NeighborNotLower {
                agent: i,
                neighbor: nb.id,
            });
        }
        if list.len() < 2 {
            return Err(TopologyViolation::TooFewNeighbors {
                agent: i,
                count: list.len(),
            });
        }
    }
    for follower in t.followers() {
        let reached = reachable_from(t, follower);
        for leader in AgentId::LEADERS {
            if !reached.contains(&leader) {
                return Err(TopologyViolation::LeaderUnreachable { leader, follower });
            }
        }
    }
    for (i, nb) in t.edges() {
        let distance = (positions[i.index()] - positions[nb.id.index()]).norm();
        if distance.is_nan() || distance <= tol.collocation {
            return Err(TopologyViolation::Collocated {
                a: i,
                b: nb.id,
                distance,
            });
        }
    }
    for i in t.followers() {
        let bearings: Vec<Vec3> = t
            .neighbors(i)
            .iter()
            .map(|nb| inertial_bearing(positions, i, nb.id))
            .collect::<Result<_, _>>()
            .map_err(|e| match e {
                WorldError::Collocated(a, b) => TopologyViolation::Collocated {
                    a,
                    b,
                    distance: 0.0,
                },
                _ => TopologyViolation::MissingPosition { agent: i },
            })?;
        let mut best = 0.0f64;
        for (k, a) in bearings.iter().enumerate() {
            for b in &bearings[k + 1..] {
                best = best.max(a.cross(b).norm());
            }
        }
        if best.is_nan() || best <= tol.collinearity {
            return Err(TopologyViolation::CollinearBearings { agent: i, best });
        }
    }
    Ok(())
}

fn unit_bearings(
    i: AgentId,
    t: &Topology,
    positions: &[Vec3],
) -> Result<Vec<(f64, Vec3)>, WorldError> {
    t.neighbors(i)
        .iter()
        .map(|nb| Ok((nb.gain, inertial_bearing(positions, i, nb.id)?)))
        .collect()
}

/// `M_i = Σ_{j∈N_i} k_ij b_ij b_ijᵀ`.
pub fn bearing_matrix(i: AgentId, t: &Topology, positions: &[Vec3]) -> Result<Mat3, WorldError> {
    Ok(unit_bearings(i, t, positions)?
        .iter()
        .fold(Mat3::zeros(), |acc, (k, b)| acc + *k * outer(b, b)))
}

/// `Q_i = Σ_{j∈N_i} k_ij [b_ij]^×ᵀ [b_ij]^×`.
pub fn stiffness_matrix(
    i: AgentId,
    t: &Topology,
    positions: &[Vec3],
) -> Result<Mat3, WorldError> {
    use crate::geom3::skew;
    Ok(unit_bearings(i, t, positions)?.iter().fold(Mat3::zeros(), |acc, (k, b)| {
        let s = skew(b);
        acc + *k * s.transpose() * s
    }))
}

/// `Σ_{j∈N_i} P_{b_ij}`, the unweighted projector sum that drives the
/// position observer.
pub fn projector_sum(i: AgentId, t: &Topology, positions: &[Vec3]) -> Result<Mat3, WorldError> {
    Ok(unit_bearings(i, t, positions)?
        .iter()
        .fold(Mat3::zeros(), |acc, (_, b)| acc + Mat3::identity() - outer(b, b)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FollowerSpectrum {
    pub agent: AgentId,
    /// Ascending eigenvalues of `M_i`.
    pub m_eigenvalues: [f64; 3],
    /// Ascending eigenvalues of `Q_i`.
    pub q_eigenvalues: [f64; 3],
    /// Ascending eigenvalues of `Σ P_{b_ij}`.
    pub p_eigenvalues: [f64; 3],
    /// Consecutive eigenvalues of `M_i` separated by more than the report's gap.
    pub distinct: bool,
    /// Smallest eigenvalue of `Q_i`.
    pub lambda_min_q: f64,
    /// Smallest eigenvalue of `Σ P_{b_ij}`.
    pub lambda_min_p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralReport {
    pub gap: f64,
    pub followers: Vec<FollowerSpectrum>,
}

impl SpectralReport {
    pub fn get(&self, i: AgentId) -> Option<&FollowerSpectrum> {
        self.followers.iter().find(|f| f.agent == i)
    }

    pub fn all_distinct(&self) -> bool {
        self.followers.iter().all(|f| f.distinct)
    }
}

fn gaps_exceed(values: &[f64; 3], gap: f64) -> bool {
    values[1] - values[0] > gap && values[2] - values[1] > gap
}

pub fn spectral_report(
    t: &Topology,
    positions: &[Vec3],
    gap: f64,
) -> Result<SpectralReport, WorldError> {
    let followers = t
        .followers()
        .map(|i| {
            let m = symmetric_eigen(&bearing_matrix(i, t, positions)?).values;
            let q = symmetric_eigen(&stiffness_matrix(i, t, positions)?).values;
            let p = symmetric_eigen(&projector_sum(i, t, positions)?).values;
            Ok(FollowerSpectrum {
                agent: i,
                m_eigenvalues: m,
                q_eigenvalues: q,
                p_eigenvalues: p,
                distinct: gaps_exceed(&m, gap),
                lambda_min_q: q[0],
                lambda_min_p: p[0],
            })
        })
        .collect::<Result<_, WorldError>>()?;
    Ok(SpectralReport { gap, followers })
}

/// Per follower: do consecutive eigenvalues of `M_i` differ by more than `gap`?
pub fn check_distinct_eigenvalues(report: &SpectralReport, gap: f64) -> Vec<(AgentId, bool)> {
    report
        .followers
        .iter()
        .map(|f| (f.agent, gaps_exceed(&f.m_eigenvalues, gap)))
        .collect()
}
