//! Message codec and error-rate metrics.
//!
//! A message selects one column per section. With `M` a power of two, the
//! encoder splits the input bit stream into segments of `log2 M` bits and the
//! integer value of segment `l` (big-endian bit order) is the column index of
//! section `l`.

use crate::error::{Error, Result};
use crate::params::SparcParams;
use alloc::format;
use alloc::vec::Vec;

/// The `L` chosen column indices, each in `[0, M)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MessageVector {
    sections: Vec<usize>,
}

impl MessageVector {
    /// Wraps pre-validated indices.
    pub fn new(sections: Vec<usize>, m: usize) -> Result<Self> {
        if let Some(&bad) = sections.iter().find(|&&i| i >= m) {
            return Err(Error::InvalidInput(format!("section index {bad} out of range for M={m}")));
        }
        Ok(MessageVector { sections })
    }

    pub fn sections(&self) -> &[usize] {
        &self.sections
    }

    pub fn len(&self) -> usize {
        self.sections.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sections.is_empty()
    }

    /// Draws a uniformly random message with `l` sections over `m` columns.
    pub fn random(l: usize, m: usize, rng: &mut impl rand::Rng) -> Self {
        MessageVector { sections: (0..l).map(|_| rng.random_range(0..m)).collect() }
    }
}

/// Decoder-side quality metrics for one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodeMetrics {
    /// Fraction of sections whose decoded index is wrong.
    pub section_error_rate: f64,
    /// Fraction of message bits decoded wrongly (big-endian bit images).
    pub bit_error_rate: f64,
    /// True iff any section differs.
    pub codeword_error: bool,
    /// Iterations the decoder ran for.
    pub iterations_used: usize,
    /// Online noise-variance estimates, one per iteration.
    pub tau_hat_trajectory: Vec<f64>,
}

impl DecodeMetrics {
    /// Attaches decoder-side bookkeeping to truth-vs-decoded metrics.
    pub fn with_decoder_info(mut self, iterations: usize, tau_hat: Vec<f64>) -> Self {
        self.iterations_used = iterations;
        self.tau_hat_trajectory = tau_hat;
        self
    }
}

/// Maps a bit string to section indices (big-endian segments of `log2 M` bits).
pub fn encode_message(bits: &[bool], params: &SparcParams) -> Result<MessageVector> {
    let b = params.bits_per_section()?;
    if bits.len() != params.l * b {
        return Err(Error::InvalidInput(format!(
            "need {} bits (L={} sections of {} bits), got {}",
            params.l * b,
            params.l,
            b,
            bits.len()
        )));
    }
    let sections = bits
        .chunks(b)
        .map(|seg| seg.iter().fold(0usize, |acc, &bit| (acc << 1) | bit as usize))
        .collect();
    Ok(MessageVector { sections })
}

/// Inverse of [`encode_message`].
pub fn decode_message(msg: &MessageVector, params: &SparcParams) -> Result<Vec<bool>> {
    let b = params.bits_per_section()?;
    let mut bits = Vec::with_capacity(msg.len() * b);
    for &idx in msg.sections() {
        for k in (0..b).rev() {
            bits.push((idx >> k) & 1 == 1);
        }
    }
    Ok(bits)
}

/// Section, bit and codeword error rates of `decoded` against `truth`.
pub fn compute_metrics(
    truth: &MessageVector,
    decoded: &MessageVector,
    params: &SparcParams,
) -> Result<DecodeMetrics> {
    if truth.len() != decoded.len() || truth.len() != params.l {
        return Err(Error::InvalidInput(format!(
            "section counts differ: truth={}, decoded={}, L={}",
            truth.len(),
            decoded.len(),
            params.l
        )));
    }
    let wrong = truth
        .sections()
        .iter()
        .zip(decoded.sections())
        .filter(|(a, b)| a != b)
        .count();
    let truth_bits = decode_message(truth, params)?;
    let decoded_bits = decode_message(decoded, params)?;
    let bit_errors = truth_bits.iter().zip(&decoded_bits).filter(|(a, b)| a != b).count();
    Ok(DecodeMetrics {
        section_error_rate: wrong as f64 / params.l as f64,
        bit_error_rate: bit_errors as f64 / truth_bits.len() as f64,
        codeword_error: wrong > 0,
        iterations_used: 0,
        tau_hat_trajectory: Vec::new(),
    })
}
