//! Monte-Carlo experiment driver.
//!
//! A [`RunConfig`] names the deployment, the URLLC and power parameters and a
//! sweep of (network, beamformer, scheme, objective, direction) tuples.
//! [`run_experiment`] evaluates every tuple on every scenario and collects the
//! per-user rates and powers into a [`ResultSet`], which [`write_outputs`]
//! persists as CSV/JSON.

mod config;
mod experiment;
mod output;
pub mod stats;

pub use config::{
    BeamformerChoice, NoiseConfig, PowerConfig, RunConfig, SweepAxes, SweepTuple, UrllcInputs,
    CONFIG_KEYS,
};
pub use experiment::{
    feasible_set, prepare_network, run_experiment, run_experiment_with, scenario_seed, solve_tuple,
    Execution, PreparedNetwork, ResultSet, RunRecord, TupleSummary, UserRecord,
};
pub use output::{ecdf_csv, results_csv, summary_json, write_outputs};
pub use stats::{ecdf, likely_rate_95};
