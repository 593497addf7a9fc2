//! Scenario assembly, the coupled truth/observer simulation, sweeps and artifacts.

mod config;
mod export;
mod run;
mod sweep;

pub use config::{
    builtin, AgentDoc, ConfigError, GainsDoc, InitialEstimateDoc, Overrides, Scenario, ScenarioDoc,
    SimulationDoc, SweepDoc, SweepSettings, ValidationDoc, PAPER_SEC5, SCENARIO_SCHEMA,
};
pub use export::{export, to_csv, write_json, ExportError};
pub use run::{
    follower_update, gather_local, run, run_with, FollowerSummary, RunOutput, RunSummary,
    SimError, TimeSeries, ATTITUDE_THRESHOLD, DIVERGENCE_LIMIT, POSITION_THRESHOLD,
};
pub use sweep::{
    basin_sweep, planted_scenario, sample_initial, trial_rng, uniform_rotation, SweepSummary,
    TrialOutcome, SAMPLER,
};
