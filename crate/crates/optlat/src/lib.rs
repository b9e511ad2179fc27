//! Scenario runner for `optlat-core`: configuration files, CSV and SVG
//! output, run manifests.

pub mod config;
pub mod dataset;
pub mod defaults;
pub mod manifest;
pub mod plot;
pub mod runs;
pub mod scenario;

pub use config::{parse_config, ConfigErrors, Scenario, ScenarioKind};
pub use manifest::RunManifest;
pub use scenario::{run_scenario, RunOptions};
