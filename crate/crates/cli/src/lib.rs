//! Experiment configuration, execution and reporting for the `monoflow`
//! command-line tool.

pub mod config;
pub mod presets;
pub mod report;
pub mod runner;

pub use config::ExperimentConfig;
pub use report::Report;
pub use runner::run;
