//! Reproducible experiment orchestration and CSV artifacts.

pub mod config;
pub mod pareto;
pub mod results;
pub mod runner;
pub mod stats;

pub use config::{DatasetConfig, DatasetKind, ExperimentConfig};
pub use pareto::{emit_pareto, ParetoPoint};
pub use results::{AggregateRow, SweepTable, TrialResult};
pub use runner::{
    run_ablation, run_baseline_comparison, run_sensitivity, run_tradeoff_sweep, theory_curves, write_outputs,
    RunFailure,
};
pub use stats::{paired_t_test, TTest};
