//! Energy-efficiency optimization for broadcast MIMO transmitters equipped with
//! a stacked intelligent metasurface (SIM).
//!
//! Two precoding schemes are covered: dirty paper coding, optimized through the
//! dual multiple-access channel, and linear precoding, optimized in a reduced
//! `K N_r`-dimensional parameterization. Both alternate a Dinkelbach/SCA update
//! of the digital part with projected gradient ascent on the SIM phases.

// comparisons are negated on purpose so that NaN takes the rejecting branch
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod config;
pub mod dpc;
pub mod error;
pub mod fractional;
pub mod harness;
pub mod lin;
pub mod linalg;
pub mod objectives;
pub mod phase;

pub use config::SystemConfig;
pub use error::{Error, Result};
