//! Experiment orchestration: configuration, single runs, Monte Carlo
//! campaigns, metrics, spectra and file outputs.

pub mod config;
pub mod metrics;
pub mod output;
pub mod prbs;
pub mod runner;
pub mod spectrum;
pub mod validate;

pub use config::{ExperimentConfig, Policy, PrbsSettings, Reference};
pub use metrics::{CampaignSummary, MetricsRecord, MetricsRow};
pub use runner::{run_monte_carlo, run_single, Campaign, Experiment, RunOutcome, StepRecord};
pub use spectrum::{welch, Spectrum};
