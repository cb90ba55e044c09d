//! The two adaptive successive decoders that preceded AMP.
//!
//! Both look across all undecoded sections each step instead of fixing a
//! decoding order. The hard-decision decoder freezes every column whose
//! inner product with the normalized residual crosses `sqrt(2 ln M) + a`.
//! The soft-decision decoder keeps refining posterior-weighted estimates,
//! combining statistics from an orthonormalized fit history with
//! deterministic coefficients.

use crate::amp::{eta_denoise, harden};
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

/// Hard-decision decoding result. Sections never crossing the threshold are
/// filled by the final statistic's argmax and flagged undecided.
#[derive(Debug, Clone)]
pub struct HardDecodeOutput {
    pub message: MessageVector,
    /// `true` for sections decoded by a threshold crossing.
    pub decided: Vec<bool>,
    pub steps_used: usize,
}

/// Adaptive successive hard-decision decoder with threshold
/// `sqrt(2 ln M) + a`.
///
/// Step 1 thresholds `<sqrt(n) A_j, y/||y||>`; later steps threshold against
/// the normalized residual of the accumulated fit. Decoded sections freeze.
/// Stops when a step decodes nothing or after `max_steps`.
pub fn adaptive_hard_decode(
    op: &impl Operator,
    y: &[f64],
    alloc: &PowerAllocation,
    params: &SparcParams,
    a: f64,
    max_steps: usize,
) -> Result<HardDecodeOutput> {
    if a < 0.0 {
        return Err(Error::InvalidInput(format!("threshold offset must be >= 0, got {a}")));
    }
    if max_steps == 0 {
        return Err(Error::InvalidInput("max_steps must be at least 1".into()));
    }
    let (n, l, m) = (op.n(), op.sections(), op.m());
    if params.l != l || params.m != m {
        return Err(Error::InvalidInput(format!(
            "parameters ({}, {}) disagree with the operator ({l}, {m})",
            params.l, params.m
        )));
    }
    let threshold = (2.0 * (m as f64).ln()).sqrt() + a;
    let coeffs = alloc.coefficients(n);
    let sqrt_n = (n as f64).sqrt();

    let mut chosen: Vec<Option<usize>> = vec![None; l];
    let mut fit = vec![0.0f64; n];
    let mut stats = vec![0.0f64; l * m];
    let mut steps_used = 0;

    for _step in 0..max_steps {
        steps_used += 1;
        let residual: Vec<f64> = y.iter().zip(&fit).map(|(&yi, &fi)| yi - fi).collect();
        let norm = residual.iter().map(|&v| v * v).sum::<f64>().sqrt();
        if norm < 1e-300 {
            break;
        }
        let scale = sqrt_n / norm;
        let adj = op.adjoint(&residual);
        for (s, &v) in stats.iter_mut().zip(&adj) {
            *s = v * scale;
        }

        let mut new_any = false;
        for sec in 0..l {
            if chosen[sec].is_some() {
                continue;
            }
            let section = &stats[sec * m..(sec + 1) * m];
            let mut best = 0;
            for (j, &v) in section.iter().enumerate() {
                if v > section[best] {
                    best = j;
                }
            }
            if section[best] > threshold {
                chosen[sec] = Some(best);
                new_any = true;
            }
        }
        if !new_any {
            break;
        }
        let msg = MessageVector::new(
            chosen.iter().map(|c| c.unwrap_or(0)).collect(),
            m,
        )?;
        let mut masked = coeffs.clone();
        for (c, sel) in masked.iter_mut().zip(&chosen) {
            if sel.is_none() {
                *c = 0.0;
            }
        }
        fit = op.encode(&msg, &masked)?;
    }

    // Undecided sections fall back to the final statistic's argmax.
    let decided: Vec<bool> = chosen.iter().map(Option::is_some).collect();
    let fallback = harden(&stats, l, m);
    let sections = chosen
        .iter()
        .zip(fallback.sections())
        .map(|(c, &f)| c.unwrap_or(f))
        .collect();
    Ok(HardDecodeOutput { message: MessageVector::new(sections, m)?, decided, steps_used })
}

/// Deterministic combination coefficients
/// `(tau_t sqrt(w_0), -tau_t sqrt(w_1), ..., -tau_t sqrt(w_t))` with
/// `w_0 = 1/tau_0^2` and `w_k = 1/tau_k^2 - 1/tau_{k-1}^2`; their squares
/// sum to one by telescoping.
pub fn deterministic_lambdas(tau_sq: &[f64], t: usize) -> Vec<f64> {
    let tau_t = tau_sq[t].sqrt();
    (0..=t)
        .map(|k| {
            let omega = if k == 0 { 1.0 / tau_sq[0] } else { 1.0 / tau_sq[k] - 1.0 / tau_sq[k - 1] };
            let lam = tau_t * omega.max(0.0).sqrt();
            if k == 0 {
                lam
            } else {
                -lam
            }
        })
        .collect()
}

/// Soft-decision decoding result.
#[derive(Debug, Clone)]
pub struct SoftDecodeOutput {
    pub message: MessageVector,
    pub beta: Vec<f64>,
    pub steps_used: usize,
}

/// Adaptive successive soft-decision decoder with deterministic coefficients.
///
/// `tau_sq_seq` is the state-evolution variance sequence `tau_0^2, tau_1^2,
/// ...` (see [`crate::se::se_trajectory`]); the last entry is held if the
/// decoder runs longer. Each step orthonormalizes the newest fit against the
/// history (classical Gram-Schmidt with one re-orthogonalization pass),
/// forms the combined statistic and applies the Bayes denoiser. A fit that
/// is numerically inside the span of its predecessors stops the decoder
/// early.
pub fn adaptive_soft_decode(
    op: &impl Operator,
    y: &[f64],
    alloc: &PowerAllocation,
    params: &SparcParams,
    tau_sq_seq: &[f64],
    steps: usize,
) -> Result<SoftDecodeOutput> {
    if steps == 0 || tau_sq_seq.is_empty() {
        return Err(Error::InvalidInput("need at least one step and one tau^2 value".into()));
    }
    let (n, l, m) = (op.n(), op.sections(), op.m());
    if y.len() != n {
        return Err(Error::InvalidInput(format!("y has length {}, expected {n}", y.len())));
    }
    let sqrt_n = (n as f64).sqrt();
    let tau2 = |t: usize| tau_sq_seq[t.min(tau_sq_seq.len() - 1)];

    // Orthonormal basis of {y, Fit_1, ..., Fit_t}.
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let y_norm = y.iter().map(|&v| v * v).sum::<f64>().sqrt();
    if y_norm < 1e-300 {
        return Err(Error::InvalidInput("received sequence is zero".into()));
    }
    basis.push(y.iter().map(|&v| v / y_norm).collect());

    // Running combination sum_k sqrt(w_k) (+/-) Z_k, so the statistic is
    // stat^t = tau_t^2 * combo + beta^t.
    let z0 = op.adjoint(&basis[0]);
    let mut combo: Vec<f64> = z0
        .iter()
        .map(|&v| v * sqrt_n * (1.0 / tau2(0)).sqrt())
        .collect();

    let mut beta = vec![0.0f64; l * m];
    let mut steps_used = 0;
    for t in 0..steps {
        if t >= 1 {
            // Orthogonalize the new fit against the basis.
            let fit = op.forward_dense(&beta);
            let fit_norm = fit.iter().map(|&v| v * v).sum::<f64>().sqrt();
            let mut g = fit;
            for _pass in 0..2 {
                for b in &basis {
                    let dot: f64 = g.iter().zip(b).map(|(&x, &u)| x * u).sum();
                    for (gi, &bi) in g.iter_mut().zip(b) {
                        *gi -= dot * bi;
                    }
                }
            }
            let g_norm = g.iter().map(|&v| v * v).sum::<f64>().sqrt();
            if g_norm < 1e-12 * fit_norm.max(1e-300) {
                // Fit subspace saturated.
                break;
            }
            for v in g.iter_mut() {
                *v /= g_norm;
            }
            let zt = op.adjoint(&g);
            let omega = (1.0 / tau2(t) - 1.0 / tau2(t - 1)).max(0.0);
            let w = omega.sqrt();
            for (c, &zv) in combo.iter_mut().zip(&zt) {
                *c -= w * sqrt_n * zv;
            }
            basis.push(g);
        }
        let tau_sq = tau2(t);
        let stat: Vec<f64> = combo.iter().zip(&beta).map(|(&c, &b)| tau_sq * c + b).collect();
        beta = eta_denoise(&stat, tau_sq, alloc, params)?;
        if beta.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence { iteration: t });
        }
        steps_used = t + 1;
    }
    Ok(SoftDecodeOutput { message: harden(&beta, l, m), beta, steps_used })
}
