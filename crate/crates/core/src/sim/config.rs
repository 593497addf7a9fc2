//! Scenario documents (TOML) and their validation into a [`Scenario`].

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::geom3::{angle_axis, normalize, RotationMatrix, Vec3};
use crate::network::{
    validate_topology, AgentId, Topology, TopologyError, TopologyViolation, ValidationTolerances,
    DEFAULT_EIGEN_GAP,
};
use crate::observers::{Estimate, Gains};
use crate::ode::Integrator;
use crate::world::OmegaSignal;

/// The eight-agent benchmark scenario, as shipped.
pub const PAPER_SEC5: &str = include_str!("../../scenarios/paper_sec5.toml");
/// JSON schema describing scenario documents.
pub const SCENARIO_SCHEMA: &str = include_str!("../../scenarios/scenario.schema.json");

/// Built-in scenarios by name.
pub fn builtin(name: &str) -> Option<&'static str> {
    match name {
        "paper_sec5" => Some(PAPER_SEC5),
        _ => None,
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot parse scenario: {0}")]
    Parse(String),
    #[error("agent {agent}: missing field `{field}`")]
    MissingField { agent: usize, field: &'static str },
    #[error("missing field `{0}`")]
    MissingTopLevel(&'static str),
    #[error("{field}: {reason}")]
    Invalid { field: String, reason: String },
    #[error("agent ids must be 1..=n without gaps or repeats; found {0:?}")]
    AgentIds(Vec<usize>),
    #[error("leader {0} must not carry an initial estimate; leaders know their pose")]
    LeaderEstimate(usize),
    #[error("leader {0} must not list neighbors")]
    LeaderNeighbors(usize),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error("topology check failed ({clause}): {0}", clause = .0.clause())]
    Violation(#[from] TopologyViolation),
}

impl ConfigError {
    fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Self::Invalid {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialEstimateDoc {
    pub position: Option<[f64; 3]>,
    /// Rotation angle of `R̂(0)` in units of π.
    pub angle_pi: Option<f64>,
    pub axis: Option<[f64; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentDoc {
    pub id: Option<usize>,
    pub position: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub neighbors: Vec<usize>,
    /// `k_ij` in the order of `neighbors`; all 1 when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edge_gains: Option<Vec<f64>>,
    #[serde(default)]
    pub omega: OmegaSignal,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_estimate: Option<InitialEstimateDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationDoc {
    pub step: Option<f64>,
    pub horizon: Option<f64>,
    pub stride: Option<usize>,
    pub seed: Option<u64>,
    pub integrator: Option<Integrator>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainsDoc {
    pub k_r: Option<f64>,
    pub k_p: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidationDoc {
    pub collocation: Option<f64>,
    pub collinearity: Option<f64>,
    pub eigen_gap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepDoc {
    pub horizon: Option<f64>,
    pub step: Option<f64>,
    pub box_half_width: Option<f64>,
    pub tolerance: Option<f64>,
}

/// A scenario document exactly as written; every field is optional so that
/// omissions can be reported by name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDoc {
    pub name: Option<String>,
    pub simulation: Option<SimulationDoc>,
    pub gains: Option<GainsDoc>,
    pub validation: Option<ValidationDoc>,
    pub sweep: Option<SweepDoc>,
    #[serde(default)]
    pub agents: Vec<AgentDoc>,
}

impl ScenarioDoc {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    /// Canonical serialization used for hashing and for reproducing a run.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).unwrap_or_default()
    }

    pub fn apply(&mut self, o: &Overrides) {
        let sim = self.simulation.get_or_insert(SimulationDoc {
            step: None,
            horizon: None,
            stride: None,
            seed: None,
            integrator: None,
        });
        if o.step.is_some() {
            sim.step = o.step;
        }
        if o.horizon.is_some() {
            sim.horizon = o.horizon;
        }
        if o.stride.is_some() {
            sim.stride = o.stride;
        }
        if o.seed.is_some() {
            sim.seed = o.seed;
        }
        if o.integrator.is_some() {
            sim.integrator = o.integrator;
        }
        let gains = self.gains.get_or_insert(GainsDoc {
            k_r: None,
            k_p: None,
        });
        if o.k_r.is_some() {
            gains.k_r = o.k_r;
        }
        if o.k_p.is_some() {
            gains.k_p = o.k_p;
        }
    }
}

/// Command-line overrides; a set field replaces the document's value.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Overrides {
    pub step: Option<f64>,
    pub horizon: Option<f64>,
    pub stride: Option<usize>,
    pub seed: Option<u64>,
    pub integrator: Option<Integrator>,
    pub k_r: Option<f64>,
    pub k_p: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepSettings {
    pub horizon: f64,
    pub step: f64,
    /// Initial `p̂` components are drawn from `[−w, w]`.
    pub box_half_width: f64,
    /// Convergence threshold on every follower's attitude and position error.
    pub tolerance: f64,
}

/// A validated scenario, ready to run.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub topology: Topology,
    pub positions: Vec<Vec3>,
    pub omegas: Vec<OmegaSignal>,
    pub gains: Gains,
    /// `R̂(0), p̂(0)` for every agent; leader entries hold the true pose.
    pub initial: Vec<Estimate>,
    pub step: f64,
    pub horizon: f64,
    pub stride: usize,
    pub seed: u64,
    pub integrator: Integrator,
    pub tolerances: ValidationTolerances,
    pub eigen_gap: f64,
    pub sweep: SweepSettings,
    /// The document this scenario was built from, overrides applied.
    pub document: ScenarioDoc,
}

fn positive(field: &str, value: f64) -> Result<f64, ConfigError> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(ConfigError::invalid(field, format!("must be positive and finite, got {value}")))
    }
}

fn finite3(field: String, v: [f64; 3]) -> Result<Vec3, ConfigError> {
    if v.iter().all(|c| c.is_finite()) {
        Ok(Vec3::from(v))
    } else {
        Err(ConfigError::invalid(field, "components must be finite"))
    }
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        Self::from_doc(ScenarioDoc::parse(text)?)
    }

    pub fn from_toml_with(text: &str, overrides: &Overrides) -> Result<Self, ConfigError> {
        let mut doc = ScenarioDoc::parse(text)?;
        doc.apply(overrides);
        Self::from_doc(doc)
    }

    pub fn paper_sec5() -> Self {
        Self::from_toml(PAPER_SEC5).expect("shipped scenario is valid")
    }

    pub fn from_doc(doc: ScenarioDoc) -> Result<Self, ConfigError> {
        let mut ids: Vec<usize> = Vec::with_capacity(doc.agents.len());
        for (k, a) in doc.agents.iter().enumerate() {
            ids.push(a.id.ok_or(ConfigError::MissingField {
                agent: k + 1,
                field: "id",
            })?);
        }
        let n = ids.len();
        let mut sorted = ids.clone();
        sorted.sort_unstable();
        if sorted != (1..=n).collect::<Vec<_>>() {
            return Err(ConfigError::AgentIds(ids));
        }
        let mut agents: Vec<&AgentDoc> = doc.agents.iter().collect();
        agents.sort_by_key(|a| a.id);

        let mut positions = Vec::with_capacity(n);
        let mut omegas = Vec::with_capacity(n);
        let mut edges = Vec::new();
        for a in &agents {
            let id = a.id.unwrap_or_default();
            let p = a.position.ok_or(ConfigError::MissingField {
                agent: id,
                field: "position",
            })?;
            positions.push(finite3(format!("agent {id}: position"), p)?);
            if !a.omega.is_finite() {
                return Err(ConfigError::invalid(format!("agent {id}: omega"), "terms must be finite"));
            }
            omegas.push(a.omega.clone());
            if id <= 2 && !a.neighbors.is_empty() {
                return Err(ConfigError::LeaderNeighbors(id));
            }
            let gains = match &a.edge_gains {
                Some(g) if g.len() != a.neighbors.len() => {
                    return Err(ConfigError::invalid(
                        format!("agent {id}: edge_gains"),
                        format!("{} gains for {} neighbors", g.len(), a.neighbors.len()),
                    ))
                }
                Some(g) => g.clone(),
                None => vec![1.0; a.neighbors.len()],
            };
            for (j, k) in a.neighbors.iter().zip(gains) {
                let to = AgentId::new(*j).ok_or_else(|| {
                    ConfigError::invalid(format!("agent {id}: neighbors"), "agent ids start at 1")
                })?;
                positive(&format!("agent {id}: edge gain toward {j}"), k)?;
                edges.push((AgentId::from_index(id - 1), to, k));
            }
        }
        let topology = Topology::new(n, edges)?;

        let validation = doc.validation.clone();
        let tolerances = ValidationTolerances {
            collocation: validation
                .as_ref()
                .and_then(|v| v.collocation)
                .map_or(Ok(1e-9), |v| positive("validation.collocation", v))?,
            collinearity: validation
                .as_ref()
                .and_then(|v| v.collinearity)
                .map_or(Ok(1e-9), |v| positive("validation.collinearity", v))?,
        };
        let eigen_gap = validation
            .as_ref()
            .and_then(|v| v.eigen_gap)
            .map_or(Ok(DEFAULT_EIGEN_GAP), |v| positive("validation.eigen_gap", v))?;
        validate_topology(&topology, &positions, &tolerances)?;

        let mut initial = Vec::with_capacity(n);
        for a in &agents {
            let id = a.id.unwrap_or_default();
            let p = positions[id - 1];
            if id <= 2 {
                if a.initial_estimate.is_some() {
                    return Err(ConfigError::LeaderEstimate(id));
                }
                initial.push(Estimate {
                    r_hat: RotationMatrix::identity(),
                    p_hat: p,
                });
                continue;
            }
            let est = a.initial_estimate.as_ref().ok_or(ConfigError::MissingField {
                agent: id,
                field: "initial_estimate",
            })?;
            let p_hat = est.position.ok_or(ConfigError::MissingField {
                agent: id,
                field: "initial_estimate.position",
            })?;
            let angle = est.angle_pi.unwrap_or(0.0);
            let r_hat = if angle == 0.0 {
                RotationMatrix::identity()
            } else {
                let axis = est.axis.ok_or(ConfigError::MissingField {
                    agent: id,
                    field: "initial_estimate.axis",
                })?;
                let axis = normalize(&finite3(format!("agent {id}: initial_estimate.axis"), axis)?)
                    .map_err(|e| ConfigError::invalid(format!("agent {id}: initial_estimate.axis"), e.to_string()))?;
                if !angle.is_finite() {
                    return Err(ConfigError::invalid(
                        format!("agent {id}: initial_estimate.angle_pi"),
                        "must be finite",
                    ));
                }
                angle_axis(angle * std::f64::consts::PI, &axis)
                    .map_err(|e| ConfigError::invalid(format!("agent {id}: initial_estimate"), e.to_string()))?
            };
            initial.push(Estimate {
                r_hat,
                p_hat: finite3(format!("agent {id}: initial_estimate.position"), p_hat)?,
            });
        }

        let sim = doc.simulation.clone().ok_or(ConfigError::MissingTopLevel("simulation"))?;
        let step = positive("simulation.step", sim.step.ok_or(ConfigError::MissingTopLevel("simulation.step"))?)?;
        let horizon = positive(
            "simulation.horizon",
            sim.horizon.ok_or(ConfigError::MissingTopLevel("simulation.horizon"))?,
        )?;
        let stride = sim.stride.unwrap_or(1);
        if stride == 0 {
            return Err(ConfigError::invalid("simulation.stride", "must be at least 1"));
        }
        let g = doc.gains.clone().ok_or(ConfigError::MissingTopLevel("gains"))?;
        let gains = Gains {
            k_r: positive("gains.k_r", g.k_r.ok_or(ConfigError::MissingTopLevel("gains.k_r"))?)?,
            k_p: positive("gains.k_p", g.k_p.ok_or(ConfigError::MissingTopLevel("gains.k_p"))?)?,
        };
        let sw = doc.sweep.clone();
        let sweep = SweepSettings {
            horizon: sw
                .as_ref()
                .and_then(|s| s.horizon)
                .map_or(Ok(60.0), |v| positive("sweep.horizon", v))?,
            step: sw
                .as_ref()
                .and_then(|s| s.step)
                .map_or(Ok(step), |v| positive("sweep.step", v))?,
            box_half_width: sw
                .as_ref()
                .and_then(|s| s.box_half_width)
                .map_or(Ok(5.0), |v| positive("sweep.box_half_width", v))?,
            tolerance: sw
                .as_ref()
                .and_then(|s| s.tolerance)
                .map_or(Ok(1e-3), |v| positive("sweep.tolerance", v))?,
        };

        Ok(Self {
            name: doc.name.clone().unwrap_or_else(|| "unnamed".into()),
            topology,
            positions,
            omegas,
            gains,
            initial,
            step,
            horizon,
            stride,
            seed: sim.seed.unwrap_or(0),
            integrator: sim.integrator.unwrap_or_default(),
            tolerances,
            eigen_gap,
            sweep,
            document: doc,
        })
    }

    pub fn agent_count(&self) -> usize {
        self.positions.len()
    }

    /// SHA-256 of the canonical document, hex encoded.
    pub fn config_hash(&self) -> String {
        hex::encode(Sha256::digest(self.document.to_toml().as_bytes()))
    }

    /// The first `n` agents; valid whenever `n ≥ 3` since neighbors always
    /// precede the agent.
    pub fn prefix(&self, n: usize) -> Result<Self, ConfigError> {
        let mut doc = self.document.clone();
        doc.agents.retain(|a| a.id.is_some_and(|id| id <= n));
        doc.name = Some(format!("{}[..{n}]", self.name));
        Self::from_doc(doc)
    }

    /// Same scenario with every follower's initial estimate replaced.
    pub fn with_initial(&self, initial: Vec<Estimate>) -> Self {
        let mut s = self.clone();
        for (k, e) in initial.into_iter().enumerate().skip(2) {
            s.initial[k] = e;
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_scenario_values() {
        let s = Scenario::paper_sec5();
        assert_eq!(s.agent_count(), 8);
        assert_eq!(s.gains, Gains { k_r: 1.0, k_p: 1.0 });
        assert!(s.topology.edges().all(|(_, nb)| nb.gain == 1.0));
        assert_eq!(s.initial[2].p_hat, Vec3::new(-2.0, 0.0, -1.0));
        assert_eq!(s.initial[7].p_hat, Vec3::new(-3.0, 0.5, 2.0));
        let expected = angle_axis(0.9 * std::f64::consts::PI, &Vec3::x()).unwrap();
        assert_eq!(s.initial[5].r_hat, expected);
        assert_eq!(s.omegas[1].eval(0.0), Vec3::new(-1.0, 1.0, 0.0));
        assert_eq!(s.omegas[0].eval(4.2), Vec3::new(1.0, -2.0, 1.0));
        let t = 0.3f64;
        assert_eq!(
            s.omegas[5].eval(t),
            Vec3::new(-(2.0 * t).cos(), (9.0 * t).sin(), 1.0)
        );
        assert_eq!((s.step, s.horizon), (1e-3, 30.0));
        let n6: Vec<usize> = s.topology.neighbors(AgentId::from_index(5)).iter().map(|nb| nb.id.number()).collect();
        assert_eq!(n6, vec![2, 4, 5]);
    }

    #[test]
    fn missing_position_is_named() {
        let text = PAPER_SEC5.replacen("position = [2.0, 0.0, 0.0]\n", "", 1);
        let err = Scenario::from_toml(&text).unwrap_err();
        assert_eq!(err.to_string(), "agent 2: missing field `position`");
    }

    #[test]
    fn zero_gain_is_rejected() {
        let text = PAPER_SEC5.replace("k_r = 1.0", "k_r = 0.0");
        let err = Scenario::from_toml(&text).unwrap_err();
        assert!(err.to_string().contains("gains.k_r"), "{err}");
        let err = Scenario::from_toml_with(PAPER_SEC5, &Overrides { horizon: Some(0.0), ..Default::default() })
            .unwrap_err();
        assert!(err.to_string().contains("simulation.horizon"), "{err}");
    }

    #[test]
    fn structural_errors() {
        let text = PAPER_SEC5.replace("neighbors = [1, 4]", "neighbors = [4]").replace(
            "id = 5\nposition = [0.0, 0.0, 2.0]\nneighbors = [4]\nedge_gains = [1.0, 1.0]",
            "id = 5\nposition = [0.0, 0.0, 2.0]\nneighbors = [4]\nedge_gains = [1.0]",
        );
        match Scenario::from_toml(&text).unwrap_err() {
            ConfigError::Violation(v) => assert_eq!(v.clause(), "at least two neighbors"),
            other => panic!("{other}"),
        }
        let text = PAPER_SEC5.replace("id = 8", "id = 9");
        assert!(matches!(Scenario::from_toml(&text), Err(ConfigError::AgentIds(_))));
        let text = PAPER_SEC5.replace("seed = 0", "seed = 0\nbogus = 1");
        assert!(matches!(Scenario::from_toml(&text), Err(ConfigError::Parse(_))));
    }

    #[test]
    fn overrides_take_precedence_and_change_the_hash() {
        let base = Scenario::paper_sec5();
        let o = Overrides {
            step: Some(2e-3),
            k_r: Some(2.0),
            ..Default::default()
        };
        let s = Scenario::from_toml_with(PAPER_SEC5, &o).unwrap();
        assert_eq!(s.step, 2e-3);
        assert_eq!(s.gains.k_r, 2.0);
        assert_eq!(s.gains.k_p, 1.0);
        assert_ne!(s.config_hash(), base.config_hash());
        assert_eq!(base.config_hash(), Scenario::paper_sec5().config_hash());
        assert_eq!(base.config_hash().len(), 64);
    }

    #[test]
    fn prefixes_are_valid_scenarios() {
        let s = Scenario::paper_sec5();
        for n in 3..=8 {
            let p = s.prefix(n).unwrap();
            assert_eq!(p.agent_count(), n);
        }
    }
}
