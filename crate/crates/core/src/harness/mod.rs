//! Experiment configuration, fleet simulation and reporting.

pub mod config;
pub mod experiment;
pub mod report;
pub mod seed;

pub use config::{parse_strategies, ExperimentConfig, Strategy};
pub use experiment::{
    run_experiment, run_experiment_ordered, DayMetrics, HouseholdTotals, MetricsReport,
    StrategyReport,
};
pub use report::{fmt_sig, write_plot_data, write_report};
pub use seed::{derive_seed, Stream};
