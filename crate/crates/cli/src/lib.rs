//! Scenario files, analysis dispatch and report emission for the `ebm` tool.

pub mod execute;
pub mod scenario;

pub use execute::{run_scenario, Outcome, Report, RunError, EXIT_BUDGET, EXIT_CLEAN, EXIT_ERROR, EXIT_VIOLATION};
pub use scenario::{parse_scenario, render_scenario, Analysis, Scenario, ScenarioError};
