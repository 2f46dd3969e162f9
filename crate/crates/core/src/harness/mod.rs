//! Experiment configuration, execution, metrics files, sweeps and rate fits.

pub mod config;
pub mod metrics;
pub mod rate;
pub mod run;
pub mod sweep;

pub use config::{parse_config, ConfigError, ExperimentConfig, OutputConfig, ProblemConfig, ProblemKind};
pub use metrics::{read_csv, write_csv, write_csv_to, MetricsRecord, CSV_HEADER};
pub use rate::{fit_loglog_slope, DEFAULT_BURN_IN};
pub use run::{build_problem, run_experiment, run_experiment_with_threads, Simulation};
pub use sweep::{parse_grid, sweep, write_sweep_csv, Grid, SweepRow, DEFAULT_MAX_RUNS};
