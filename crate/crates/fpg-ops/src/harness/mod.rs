//! Experiment orchestration: configuration, persistence formats, the
//! two-stage inference loop, benchmark evaluation, and the CLI.

pub mod algorithm;
pub mod bench;
pub mod checkpoint;
mod cli;
pub mod config;
pub mod dataset;
pub mod trace;

pub use algorithm::{rollout_states, run_algorithm1, Algorithm1Output};
pub use bench::{format_table, run_benchmark, BenchmarkReport, Comparison, MethodStats};
pub use checkpoint::{load_checkpoint, save_checkpoint, LoadedCheckpoint};
pub use cli::cli_entry;
pub use config::{GuidanceConfig, RunConfig, OUT_DIR_ENV};
pub use dataset::{Dataset, DatasetRecord};
pub use trace::{CandidateTrace, RunTrace, StepTrace};
