//! Reproducible experiment runner: flat-file configuration, seeded
//! disorder ensembles, aggregation and plot-data emission.
//!
//! Experiments are described by a flat `key = value` text format (one key
//! per line, `#` comments). Parsing validates every field against an
//! explicit range and reports all problems at once. Realization k of an
//! ensemble is seeded with `seed_base + k`, so identical configs produce
//! identical numbers; the only volatile output field is the wall-clock
//! line in the run summary.
//!
//! Exit-code contract of the CLI built on this module: 0 success,
//! 2 configuration error, 3 numerical-contract violation, 4 I/O failure.

mod config;
mod output;
mod runner;

pub use config::{
    parse_config, BoxConfig, ConfigError, ConfigErrors, ExperimentConfig, ExperimentKind,
    ProcessConfig,
};
pub use output::{export_results, parse_series, parse_summary};
pub use runner::{
    run_experiment, ExperimentError, GreenKuboOutcome, KindOutcome, MeasureOutcome, RunRecord,
    ScalingOutcome, UniformityProbe,
};
