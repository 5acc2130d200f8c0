//! Experiment configuration, runs and reports behind the `fkslab` binary.

pub mod config;
pub mod experiment;

pub use config::{parse_config, Check, ConfigError, ExperimentConfig, GraphSpec};
pub use experiment::{
    bound_report, exact_verdict, run_exact, run_experiment, BoundReport, OutputOptions, RunError, RunReport, VerdictRow,
};
