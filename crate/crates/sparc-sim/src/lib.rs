//! Batch Monte-Carlo harness for sparse regression codes.
//!
//! Drives the decoders in `sparc-core` over AWGN channel trials, spatially
//! coupled codes, broadcast/MAC assemblies, the lossy compressor and the
//! side-information toys, emitting deterministic CSV. Trials are independent
//! work units with counter-derived seeds, so results are bit-identical for
//! any worker count.

pub mod config;
pub mod posteriors;
pub mod runner;

pub use config::{AllocScheme, DesignChoice, ExperimentConfig, RateSpec, Scenario};
pub use posteriors::{bit_posteriors, outer_code_hook};
pub use runner::{run_experiment, SimError};

use sparc_core::rng::mix64;

/// Seed of trial `t`'s random stream.
pub fn trial_seed(master: u64, trial: u64) -> u64 {
    mix64(mix64(master, 0x7121_A15E), trial)
}

/// Seed of the shared design operator's stream.
pub fn design_seed(master: u64) -> u64 {
    mix64(master, 0xDE51_6E5E)
}

/// Seed of the state-evolution sampler's stream.
pub fn se_seed(master: u64) -> u64 {
    mix64(master, 0x5E5A_3513)
}
