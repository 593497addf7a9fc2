//! Random valid scenarios for cross-checks.

#![allow(dead_code)]

use bearing_pose::network::ValidationTolerances;
use bearing_pose::sim::{
    AgentDoc, GainsDoc, InitialEstimateDoc, Scenario, ScenarioDoc, SimulationDoc, PAPER_SEC5,
};
use bearing_pose::world::{OmegaSignal, SignalTerm};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

fn signal(rng: &mut impl Rng) -> Vec<SignalTerm> {
    let mut terms = vec![SignalTerm::Const {
        amplitude: rng.random_range(-1.5..1.5),
    }];
    if rng.random_bool(0.5) {
        terms.push(SignalTerm::Sin {
            amplitude: rng.random_range(-1.0..1.0),
            frequency: rng.random_range(0.2..3.0),
        });
    }
    if rng.random_bool(0.5) {
        terms.push(SignalTerm::Cos {
            amplitude: rng.random_range(-1.0..1.0),
            frequency: rng.random_range(0.2..3.0),
        });
    }
    terms
}

fn unit(rng: &mut impl Rng) -> [f64; 3] {
    loop {
        let v: [f64; 3] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        let n = v.iter().map(|c| c * c).sum::<f64>().sqrt();
        if n > 0.1 && n <= 1.0 {
            return v.map(|c| c / n);
        }
    }
}

/// A random network of 4 to 8 agents: random positions, edge gains, angular
/// velocities and initial estimates. Follower 3 always sees both leaders, so
/// every follower reaches both. Drawn again until the topology checks pass
/// with a comfortable margin.
pub fn random_scenario(seed: u64) -> Scenario {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let base = ScenarioDoc::parse(PAPER_SEC5).unwrap();
    loop {
        let n = rng.random_range(4..=8usize);
        let agents = (1..=n)
            .map(|id| {
                let neighbors: Vec<usize> = match id {
                    1 | 2 => vec![],
                    3 => vec![1, 2],
                    _ => {
                        let k = rng.random_range(2..=(id - 1).min(4));
                        let mut picked: Vec<usize> =
                            sample(&mut rng, id - 1, k).into_iter().map(|j| j + 1).collect();
                        picked.sort_unstable();
                        picked
                    }
                };
                let edge_gains = (!neighbors.is_empty())
                    .then(|| neighbors.iter().map(|_| rng.random_range(0.5..2.0)).collect());
                let initial_estimate = (id > 2).then(|| InitialEstimateDoc {
                    position: Some(std::array::from_fn(|_| rng.random_range(-4.0..4.0))),
                    angle_pi: Some(rng.random_range(0.0..0.9)),
                    axis: Some(unit(&mut rng)),
                });
                AgentDoc {
                    id: Some(id),
                    position: Some(std::array::from_fn(|_| rng.random_range(-3.0..3.0))),
                    neighbors,
                    edge_gains,
                    omega: OmegaSignal {
                        x: signal(&mut rng),
                        y: signal(&mut rng),
                        z: signal(&mut rng),
                    },
                    initial_estimate,
                }
            })
            .collect();
        let doc = ScenarioDoc {
            name: Some(format!("random-{seed}")),
            simulation: Some(SimulationDoc {
                step: Some(1e-3),
                horizon: Some(30.0),
                stride: Some(10),
                seed: Some(seed),
                integrator: None,
            }),
            gains: Some(GainsDoc {
                k_r: Some(rng.random_range(0.5..2.0)),
                k_p: Some(rng.random_range(0.5..2.0)),
            }),
            agents,
            ..base.clone()
        };
        if let Ok(s) = Scenario::from_doc(doc) {
            let strict = ValidationTolerances {
                collocation: 0.3,
                collinearity: 0.2,
            };
            if bearing_pose::network::validate_topology(&s.topology, &s.positions, &strict).is_ok() {
                return s;
            }
        }
    }
}
