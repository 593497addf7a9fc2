//! The distributed attitude and position observers.
//!
//! Each follower sees only its own gyro reading `ω_i`, its own body-frame
//! bearings `b_ij^i`, and one [`NeighborPacket`] per neighbor. Nothing in this
//! module takes ground truth; the simulator assembles those inputs.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom3::{skew, RotationMatrix, Vec3, UNIT_TOL};
use crate::network::{AgentId, Neighbor};
use crate::world::BearingMeasurement;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ObserverError {
    #[error("agent {agent} has no packet from neighbor {neighbor}")]
    MissingPacket { agent: AgentId, neighbor: AgentId },
    #[error("agent {agent} received a packet from {sender}, which is not a neighbor")]
    UnexpectedPacket { agent: AgentId, sender: AgentId },
    #[error("agent {agent} received more than one packet from {sender}")]
    DuplicatePacket { agent: AgentId, sender: AgentId },
    #[error("agent {agent} has no bearing measurement toward neighbor {neighbor}")]
    MissingBearing { agent: AgentId, neighbor: AgentId },
    #[error("agent {agent} holds a bearing {from}→{to} that is not one of its own neighbor bearings")]
    UnexpectedBearing {
        agent: AgentId,
        from: AgentId,
        to: AgentId,
    },
    #[error("bearing {from}→{to} has norm {norm}; bearings must be unit vectors")]
    NonUnitBearing { from: AgentId, to: AgentId, norm: f64 },
    #[error("gain {name} = {value} must be positive and finite")]
    NonPositiveGain { name: &'static str, value: f64 },
}

/// Global observer gains. Edge gains `k_ij` live on the topology.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gains {
    pub k_r: f64,
    pub k_p: f64,
}

impl Gains {
    pub fn new(k_r: f64, k_p: f64) -> Result<Self, ObserverError> {
        for (name, value) in [("k_R", k_r), ("k_p", k_p)] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(ObserverError::NonPositiveGain { name, value });
            }
        }
        Ok(Self { k_r, k_p })
    }
}

impl Default for Gains {
    fn default() -> Self {
        Self { k_r: 1.0, k_p: 1.0 }
    }
}

/// What agent `j` broadcasts to the agents that list it as a neighbor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeighborPacket {
    pub sender: AgentId,
    pub r_hat: RotationMatrix,
    pub p_hat: Vec3,
    /// `b_ji^j`: the sender's body-frame bearing toward the receiver.
    pub bearing_to_receiver: Vec3,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub r_hat: RotationMatrix,
    pub p_hat: Vec3,
}

/// Estimates of every agent, indexed by `AgentId::index()`. Leader entries
/// are overwritten with the true pose by whoever owns the truth.
#[derive(Debug, Clone, PartialEq)]
pub struct ObserverState {
    pub estimates: Vec<Estimate>,
}

impl ObserverState {
    pub fn get(&self, id: AgentId) -> Option<&Estimate> {
        self.estimates.get(id.index())
    }

    /// Sets `R̂_l = R_l`, `p̂_l = p_l` for both leaders.
    pub fn sync_leaders(&mut self, attitudes: &[RotationMatrix], positions: &[Vec3]) {
        for l in AgentId::LEADERS {
            let k = l.index();
            if k < self.estimates.len() {
                self.estimates[k] = Estimate {
                    r_hat: attitudes[k],
                    p_hat: positions[k],
                };
            }
        }
    }
}

/// Everything follower `agent` may use in one evaluation of its laws.
#[derive(Debug, Clone, Copy)]
pub struct LocalInputs<'a> {
    pub agent: AgentId,
    pub own: Estimate,
    pub omega: Vec3,
    pub neighbors: &'a [Neighbor],
    pub own_bearings: &'a [BearingMeasurement],
    pub packets: &'a [NeighborPacket],
}

/// One neighbor's contribution, after matching packet and bearing to `N_i`.
#[derive(Debug, Clone, Copy)]
struct Link {
    gain: f64,
    /// `b_ij^i`
    own_bearing: Vec3,
    /// `b_ij^j = −b_ji^j`
    far_bearing: Vec3,
    r_hat: RotationMatrix,
    p_hat: Vec3,
}

fn check_unit(from: AgentId, to: AgentId, b: &Vec3) -> Result<(), ObserverError> {
    let norm = b.norm();
    if (norm - 1.0).abs() > UNIT_TOL {
        return Err(ObserverError::NonUnitBearing { from, to, norm });
    }
    Ok(())
}

fn links(inputs: &LocalInputs<'_>) -> Result<Vec<Link>, ObserverError> {
    let agent = inputs.agent;
    let is_neighbor = |id: AgentId| inputs.neighbors.iter().any(|nb| nb.id == id);
    for (k, p) in inputs.packets.iter().enumerate() {
        if !is_neighbor(p.sender) {
            return Err(ObserverError::UnexpectedPacket {
                agent,
                sender: p.sender,
            });
        }
        if inputs.packets[..k].iter().any(|q| q.sender == p.sender) {
            return Err(ObserverError::DuplicatePacket {
                agent,
                sender: p.sender,
            });
        }
    }
    for m in inputs.own_bearings {
        if m.from != agent || !is_neighbor(m.to) {
            return Err(ObserverError::UnexpectedBearing {
                agent,
                from: m.from,
                to: m.to,
            });
        }
    }
    inputs
        .neighbors
        .iter()
        .map(|nb| {
            let packet = inputs
                .packets
                .iter()
                .find(|p| p.sender == nb.id)
                .ok_or(ObserverError::MissingPacket {
                    agent,
                    neighbor: nb.id,
                })?;
            let own = inputs
                .own_bearings
                .iter()
                .find(|m| m.to == nb.id)
                .ok_or(ObserverError::MissingBearing {
                    agent,
                    neighbor: nb.id,
                })?;
            check_unit(agent, nb.id, &own.body_bearing)?;
            check_unit(nb.id, agent, &packet.bearing_to_receiver)?;
            Ok(Link {
                gain: nb.gain,
                own_bearing: own.body_bearing,
                far_bearing: -packet.bearing_to_receiver,
                r_hat: packet.r_hat,
                p_hat: packet.p_hat,
            })
        })
        .collect()
}

fn correction_from_links(r_hat: &RotationMatrix, links: &[Link]) -> Vec3 {
    links.iter().fold(Vec3::zeros(), |acc, l| {
        acc + l.gain * l.r_hat.rotate(&l.far_bearing).cross(&r_hat.rotate(&l.own_bearing))
    })
}

/// `c_i = Σ_{j∈N_i} k_ij (R̂_j b_ij^j × R̂_i b_ij^i)`.
pub fn correction_vector(inputs: &LocalInputs<'_>) -> Result<Vec3, ObserverError> {
    Ok(correction_from_links(&inputs.own.r_hat, &links(inputs)?))
}

/// Body-frame rate `u_i = ω_i − k_R R̂_iᵀ c_i`, so that `R̂̇_i = R̂_i[u_i]^×`.
pub fn attitude_rate(inputs: &LocalInputs<'_>, gains: &Gains) -> Result<Vec3, ObserverError> {
    let c = correction_vector(inputs)?;
    Ok(attitude_rate_from(&inputs.own.r_hat, &c, &inputs.omega, gains))
}

fn attitude_rate_from(r_hat: &RotationMatrix, c: &Vec3, omega: &Vec3, gains: &Gains) -> Vec3 {
    omega - gains.k_r * r_hat.rotate_inv(c)
}

fn position_rate_from(own: &Estimate, c: &Vec3, links: &[Link], gains: &Gains) -> Vec3 {
    let transport = -gains.k_r * skew(c) * own.p_hat;
    let pull = links.iter().fold(Vec3::zeros(), |acc, l| {
        let b = own.r_hat.rotate(&l.own_bearing);
        acc + project_out(&b, &(own.p_hat - l.p_hat))
    });
    transport - gains.k_p * pull
}

/// `ṗ̂_i = −k_R [c_i]^× p̂_i − k_p Σ_{j∈N_i} R̂_i P_{b_ij^i} R̂_iᵀ (p̂_i − p̂_j)`.
pub fn position_rate(inputs: &LocalInputs<'_>, gains: &Gains) -> Result<Vec3, ObserverError> {
    let links = links(inputs)?;
    let c = correction_from_links(&inputs.own.r_hat, &links);
    Ok(position_rate_from(&inputs.own, &c, &links, gains))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FollowerRates {
    pub correction: Vec3,
    /// Body-frame rate for `R̂_i`.
    pub attitude: Vec3,
    /// `ṗ̂_i`.
    pub position: Vec3,
}

/// Both laws with a single evaluation of the shared correction vector.
pub fn follower_rates(inputs: &LocalInputs<'_>, gains: &Gains) -> Result<FollowerRates, ObserverError> {
    let links = links(inputs)?;
    let c = correction_from_links(&inputs.own.r_hat, &links);
    Ok(FollowerRates {
        correction: c,
        attitude: attitude_rate_from(&inputs.own.r_hat, &c, &inputs.omega, gains),
        position: position_rate_from(&inputs.own, &c, &links, gains),
    })
}

/// `f_j = ((R̃_j − I) − (R̃_i − I)) R̃_jᵀ (p_j − p̃_j) + p̃_j`.
pub fn f_term(
    p_tilde_j: &Vec3,
    r_tilde_j: &RotationMatrix,
    r_tilde_i: &RotationMatrix,
    p_j: &Vec3,
) -> Vec3 {
    let q = r_tilde_j.rotate_inv(&(p_j - p_tilde_j));
    (r_tilde_j.matrix() - r_tilde_i.matrix()) * q + p_tilde_j
}

/// `P_x = I − x xᵀ` applied to `v` for a unit `x`, without forming the matrix.
pub(crate) fn project_out(x: &Vec3, v: &Vec3) -> Vec3 {
    v - x * x.dot(v)
}
