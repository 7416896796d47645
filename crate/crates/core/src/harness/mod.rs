//! Experiment configuration, pipelines and report emission.

pub mod config;
pub mod figure;
pub mod pipeline;
pub mod sweep;

pub use config::{parse_config, parse_config_str, ExperimentConfig};
pub use figure::run_bound_figure;
pub use pipeline::{run_single, RunReport};
pub use sweep::run_assumption_sweep;
