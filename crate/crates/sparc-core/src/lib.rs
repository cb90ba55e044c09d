//! Sparse regression codes (SPARCs) for the AWGN channel and lossy compression.
//!
//! A SPARC codeword is `A * beta`, where `A` is an `n x ML` design matrix split
//! into `L` sections of `M` columns, and `beta` holds exactly one non-zero per
//! section. The message is the tuple of non-zero locations; the non-zero values
//! carry a per-section power allocation.
//!
//! The crate provides:
//!
//! * [`params`] / [`message`] — code geometry, the bit-segment message codec,
//!   and error-rate metrics.
//! * [`design`] — Gaussian, Bernoulli and Hadamard-based design operators, the
//!   latter applied with a fast Walsh-Hadamard transform.
//! * [`power`] — flat, exponential, modified-exponential and iterative power
//!   allocations, plus the bracket partition used for multiple-access codes.
//! * [`amp`] — the approximate message passing decoder with online noise
//!   estimation and early termination.
//! * [`se`] — state-evolution predictions of decoding progress.
//! * [`legacy`] — the adaptive successive hard- and soft-decision decoders.
//! * [`sc`] — spatially coupled SPARCs: base matrices, block designs, SC-AMP
//!   and its block state evolution.
//! * [`compress`] — the successive-cancellation lossy compressor.
//! * [`multiuser`] — broadcast/MAC code assembly, codebook binning, and toy
//!   Wyner-Ziv / Gelfand-Pinsker pipelines.
//! * [`oracle`] — exhaustive least-squares search over tiny codebooks.
//!
//! The crate is `no_std`-compatible (with `alloc`); the companion `sparc-sim`
//! crate carries the batch-simulation harness, CLI and file formats.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod amp;
pub mod compress;
pub mod design;
mod error;
pub mod legacy;
pub mod message;
pub mod multiuser;
pub mod oracle;
pub mod params;
pub mod power;
pub mod rng;
pub mod sc;
pub mod se;

pub use error::{Error, Result};
pub use message::{compute_metrics, decode_message, encode_message, DecodeMetrics, MessageVector};
pub use params::SparcParams;
pub use power::PowerAllocation;
