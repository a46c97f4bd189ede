//! Scenario files, dataset loaders, reports and the `ecoorc` command line
//! on top of `ecoorc-core`.

pub mod cache;
pub mod commands;
pub mod datasets;
pub mod report;
pub mod scenario;
pub mod svg;

pub use scenario::{load_scenario, Scenario, ScenarioError};
