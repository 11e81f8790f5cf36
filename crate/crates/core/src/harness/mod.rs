//! Experiment orchestration: AO loops, benchmarks, complexity accounting and
//! result persistence.

pub mod ao;
pub mod complexity;
pub mod config;
pub mod experiment;

pub use ao::{run_ao_dpc, run_ao_lp, AoRecord, AoRun, LpDigital};
pub use config::{ExperimentConfig, Scheme};
