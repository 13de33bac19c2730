//! Monte Carlo experiment harness: scenario configs, the trial runner,
//! parameter sweeps and result emission.

mod config;
mod emit;
mod runner;

pub use config::{
    ConfigFile, NfrSpec, Scenario, SweepParameter, SweepSpec, TrialBudget,
};
pub use emit::{emit_results, emit_sweep, scenario_hash, OutputFormat};
pub use runner::{run_scenario, run_sweep, PointReport, ScenarioReport, SweepCell, SweepReport};
