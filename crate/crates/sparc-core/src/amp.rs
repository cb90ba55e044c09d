//! Approximate message passing decoder for power-allocated SPARCs.
//!
//! Starting from `beta^0 = 0`, `z^{-1} = 0`, each iteration computes
//!
//! ```text
//! z^t    = y - A beta^t + z^{t-1}/tau^2_{t-1} (P - ||beta^t||^2 / n)
//! stat^t = A^T z^t + beta^t
//! beta^{t+1} = eta_t(stat^t)
//! ```
//!
//! where `eta_t` is the sectionwise Bayes-optimal denoiser. The correction
//! added to the plain residual (the Onsager term) keeps `stat^t` distributed
//! as the true message plus white Gaussian noise of variance `tau_t^2`, which
//! is either estimated online as `||z^t||^2 / n` or taken from a precomputed
//! state-evolution schedule.

use crate::design::Operator;
use crate::error::{Error, Result};
use crate::message::MessageVector;
use crate::params::SparcParams;
use crate::power::PowerAllocation;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

/// Source of the per-iteration noise variances `tau_t^2`.
#[derive(Debug, Clone, PartialEq)]
pub enum TauSchedule {
    /// Estimate `tau_t^2 = ||z^t||^2 / n` after producing each residual.
    Online,
    /// Use a precomputed state-evolution sequence; the last value is held if
    /// the decoder runs longer than the schedule.
    Precomputed(Vec<f64>),
}

/// Decoder configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct AmpConfig {
    pub tau_schedule: TauSchedule,
    pub max_iters: usize,
    /// Stop once `|tau_hat^2_t - tau_hat^2_{t-1}|` falls below this; defaults
    /// to the smallest section power `P_L`.
    pub stop_threshold: Option<f64>,
    /// Disables the Onsager correction. Diagnostic switch only: without it
    /// the decoder no longer tracks state evolution.
    pub onsager: bool,
}

impl AmpConfig {
    pub fn online(max_iters: usize) -> Self {
        AmpConfig { tau_schedule: TauSchedule::Online, max_iters, stop_threshold: None, onsager: true }
    }

    pub fn precomputed(tau_sq: Vec<f64>) -> Self {
        let max_iters = tau_sq.len();
        AmpConfig {
            tau_schedule: TauSchedule::Precomputed(tau_sq),
            max_iters,
            stop_threshold: None,
            onsager: true,
        }
    }

    pub fn with_max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }

    pub fn with_stop_threshold(mut self, threshold: f64) -> Self {
        self.stop_threshold = Some(threshold);
        self
    }
}

/// Decoder result: hardened message plus the final soft estimate.
#[derive(Debug, Clone)]
pub struct AmpOutput {
    pub message: MessageVector,
    /// Final `beta^T`: per-section weighted posteriors scaled by `sqrt(n P_l)`.
    pub beta: Vec<f64>,
    pub iterations: usize,
    /// `tau_t^2` actually used, one entry per iteration.
    pub tau_sq_trajectory: Vec<f64>,
}

/// Decoder state passed to iteration observers.
pub struct AmpIterate<'a> {
    /// Iteration index `t` (0-based).
    pub iteration: usize,
    /// The modified residual `z^t`.
    pub residual: &'a [f64],
    /// `tau_t^2` used by the denoiser this iteration.
    pub tau_sq: f64,
    /// The updated estimate `beta^{t+1}`.
    pub beta_after: &'a [f64],
}

/// Sectionwise Bayes-optimal denoiser: within section `l`,
/// `eta_i(s) = sqrt(n P_l) exp(s_i sqrt(n P_l)/tau^2) / sum_j exp(s_j sqrt(n P_l)/tau^2)`.
///
/// Computed with per-section max subtraction so large statistics saturate
/// to a one-hot section instead of overflowing.
pub fn eta_denoise(
    stat: &[f64],
    tau_sq: f64,
    alloc: &PowerAllocation,
    params: &SparcParams,
) -> Result<Vec<f64>> {
    if tau_sq <= 0.0 {
        return Err(Error::InvalidInput(format!("tau^2 must be positive, got {tau_sq}")));
    }
    if stat.len() != alloc.len() * params.m {
        return Err(Error::InvalidInput(format!(
            "statistic length {} != L*M = {}",
            stat.len(),
            alloc.len() * params.m
        )));
    }
    let m = params.m;
    let mut out = vec![0.0f64; stat.len()];
    for (sec, &p) in alloc.values().iter().enumerate() {
        let c = (params.n as f64 * p).sqrt();
        let section = &stat[sec * m..(sec + 1) * m];
        let slot = &mut out[sec * m..(sec + 1) * m];
        if c == 0.0 {
            continue;
        }
        let scale = c / tau_sq;
        let top = section.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b * scale));
        let mut denom = 0.0;
        for (o, &s) in slot.iter_mut().zip(section) {
            let w = (s * scale - top).exp();
            *o = w;
            denom += w;
        }
        for o in slot.iter_mut() {
            *o *= c / denom;
        }
    }
    Ok(out)
}

/// Per-section argmax; the lowest index wins ties.
pub fn harden(beta: &[f64], l: usize, m: usize) -> MessageVector {
    let sections = (0..l)
        .map(|sec| {
            let s = &beta[sec * m..(sec + 1) * m];
            let mut best = 0;
            for (j, &v) in s.iter().enumerate() {
                if v > s[best] {
                    best = j;
                }
            }
            best
        })
        .collect();
    MessageVector::new(sections, m).expect("indices in range by construction")
}

/// Runs the AMP decoder.
pub fn amp_decode(
    op: &impl Operator,
    y: &[f64],
    alloc: &PowerAllocation,
    params: &SparcParams,
    config: &AmpConfig,
) -> Result<AmpOutput> {
    amp_decode_with(op, y, alloc, params, config, |_| {})
}

/// Runs the AMP decoder, calling `observe` after each iteration.
pub fn amp_decode_with(
    op: &impl Operator,
    y: &[f64],
    alloc: &PowerAllocation,
    params: &SparcParams,
    config: &AmpConfig,
    mut observe: impl FnMut(&AmpIterate<'_>),
) -> Result<AmpOutput> {
    let n = op.n();
    let l = op.sections();
    let m = op.m();
    if y.len() != n {
        return Err(Error::InvalidInput(format!("y has length {}, expected {n}", y.len())));
    }
    if alloc.len() != l {
        return Err(Error::InvalidInput(format!(
            "allocation has {} sections, operator has {l}",
            alloc.len()
        )));
    }
    if config.max_iters == 0 {
        return Err(Error::InvalidInput("max_iters must be at least 1".into()));
    }
    let total_power: f64 = alloc.total();
    let stop = config
        .stop_threshold
        .unwrap_or_else(|| alloc.values().last().copied().unwrap_or(0.0));

    let mut beta = vec![0.0f64; l * m];
    let mut z = vec![0.0f64; n];
    let mut tau_sq_prev = 0.0f64;
    let mut trajectory = Vec::new();
    let mut iterations = 0;

    for t in 0..config.max_iters {
        // Modified residual with the Onsager correction.
        let fit = op.forward_dense(&beta);
        let beta_norm_sq: f64 = beta.iter().map(|&b| b * b).sum();
        let onsager_coef = if t == 0 || !config.onsager {
            0.0
        } else {
            (total_power - beta_norm_sq / n as f64) / tau_sq_prev
        };
        for i in 0..n {
            z[i] = y[i] - fit[i] + onsager_coef * z[i];
        }

        let tau_sq = match &config.tau_schedule {
            // Floored so a bit-exact decode (zero residual) saturates the
            // denoiser instead of dividing by zero.
            TauSchedule::Online => (z.iter().map(|&v| v * v).sum::<f64>() / n as f64).max(1e-30),
            TauSchedule::Precomputed(seq) => seq[t.min(seq.len() - 1)],
        };
        if !tau_sq.is_finite() || tau_sq <= 0.0 {
            return Err(Error::Divergence { iteration: t });
        }
        trajectory.push(tau_sq);

        let mut stat = op.adjoint(&z);
        for (s, &b) in stat.iter_mut().zip(&beta) {
            *s += b;
        }
        beta = eta_denoise(&stat, tau_sq, alloc, params)?;
        if beta.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence { iteration: t });
        }
        iterations = t + 1;
        observe(&AmpIterate { iteration: t, residual: &z, tau_sq, beta_after: &beta });

        if t >= 1 && (tau_sq - tau_sq_prev).abs() < stop {
            break;
        }
        tau_sq_prev = tau_sq;
    }

    Ok(AmpOutput {
        message: harden(&beta, l, m),
        beta,
        iterations,
        tau_sq_trajectory: trajectory,
    })
}

/// Subtracts the codeword contribution of a fixed suffix of sections from
/// `y` and re-runs AMP on the unprotected prefix alone.
///
/// `fixed[l]` is `Some(column)` for every fixed section; the fixed sections
/// must form a contiguous suffix. The output merges the re-decoded prefix
/// with the fixed suffix.
pub fn rerun_unprotected(
    op: &crate::design::DesignOperator,
    y: &[f64],
    fixed: &[Option<usize>],
    alloc: &PowerAllocation,
    params: &SparcParams,
    config: &AmpConfig,
) -> Result<MessageVector> {
    let l = op.sections();
    if fixed.len() != l {
        return Err(Error::InvalidInput(format!(
            "fixed-section list has length {}, expected {l}",
            fixed.len()
        )));
    }
    let prefix_len = fixed.iter().position(Option::is_some).unwrap_or(l);
    if fixed[prefix_len..].iter().any(Option::is_none) {
        return Err(Error::Config("fixed sections must form a contiguous suffix".into()));
    }

    if prefix_len == 0 {
        let sections = fixed.iter().map(|s| s.unwrap()).collect();
        return MessageVector::new(sections, op.m());
    }
    if prefix_len == l {
        return Ok(amp_decode(op, y, alloc, params, config)?.message);
    }

    // y' = y - A beta_fixed: encode the suffix with zero coefficients up front.
    let mut coeffs = alloc.coefficients(op.n());
    for c in coeffs[..prefix_len].iter_mut() {
        *c = 0.0;
    }
    let suffix_msg = MessageVector::new(
        fixed.iter().map(|s| s.unwrap_or(0)).collect(),
        op.m(),
    )?;
    let suffix_codeword = op.encode(&suffix_msg, &coeffs)?;
    let y_prime: Vec<f64> = y.iter().zip(&suffix_codeword).map(|(&a, &b)| a - b).collect();

    // The prefix behaves like a standalone code at its own (lower) rate.
    let view = crate::design::PrefixOperator::new(op, prefix_len)?;
    let prefix_alloc = PowerAllocation::from_values(alloc.values()[..prefix_len].to_vec());
    let prefix_params = SparcParams::with_exact_rate(
        params.n,
        prefix_len,
        params.m,
        prefix_alloc.total(),
        params.noise_var,
    )?;
    let out = amp_decode(&view, &y_prime, &prefix_alloc, &prefix_params, config)?;

    let mut sections = out.message.sections().to_vec();
    sections.extend(fixed[prefix_len..].iter().map(|s| s.unwrap()));
    MessageVector::new(sections, op.m())
}
