//! Experiment runner: configs, chains, histograms and comparisons against
//! the large-population limits.

pub mod compare;
pub mod config;
pub mod error;
pub mod histogram;
pub mod oracle_report;
pub mod run;
pub mod stats;
pub mod suite;

pub use compare::{compare_to_prediction, ComparisonReport, Metric};
pub use config::{ExperimentConfig, KernelKind};
pub use error::{CliError, CliResult};
pub use histogram::{build_histogram, FrequencyHistogram};
pub use run::{chain_setup, run_chain, ChainSetup};
pub use suite::{run_suite, write_outputs, Summary};
