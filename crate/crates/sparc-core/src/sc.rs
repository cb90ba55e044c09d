//! Spatially coupled SPARCs.
//!
//! The design matrix is partitioned into `L_R x L_C` blocks whose entry
//! variances follow a band-diagonal base matrix; every non-zero message
//! coefficient equals one, so the "power allocation" lives entirely in the
//! matrix. Decoding proceeds as a wave from both ends of the band towards
//! the middle, predicted by a block-indexed state evolution.

use crate::design::{DesignKind, DesignOperator, Operator};
use crate::error::{Error, Result};
use crate::message::MessageVector;
use crate::params::SparcParams;
use crate::rng::mix64;
use crate::se::sent_weight_mc;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

/// Block variance profile: `L_R x L_C` non-negative entries averaging `P`.
#[derive(Debug, Clone, PartialEq)]
pub struct BaseMatrix {
    l_r: usize,
    l_c: usize,
    entries: Vec<f64>,
}

impl BaseMatrix {
    pub fn new(l_r: usize, l_c: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != l_r * l_c || l_r == 0 || l_c == 0 {
            return Err(Error::InvalidInput(format!(
                "base matrix needs {l_r} x {l_c} entries, got {}",
                entries.len()
            )));
        }
        if entries.iter().any(|&w| w < 0.0 || !w.is_finite()) {
            return Err(Error::InvalidInput("base matrix entries must be non-negative".into()));
        }
        Ok(BaseMatrix { l_r, l_c, entries })
    }

    pub fn rows(&self) -> usize {
        self.l_r
    }

    pub fn cols(&self) -> usize {
        self.l_c
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.entries[r * self.l_c + c]
    }

    /// Average entry, which equals the per-sample codeword power.
    pub fn average(&self) -> f64 {
        self.entries.iter().sum::<f64>() / (self.l_r * self.l_c) as f64
    }
}

/// Band-diagonal `(omega, Lambda)` base matrix: `Lambda + omega - 1` rows,
/// `Lambda` columns, and `W_rc = P (Lambda + omega - 1)/omega` on the band
/// `c <= r <= c + omega - 1`.
pub fn build_base(omega: usize, lambda: usize, p: f64) -> Result<BaseMatrix> {
    if omega < 1 || lambda < 2 * omega - 1 {
        return Err(Error::InvalidInput(format!(
            "need omega >= 1 and Lambda >= 2 omega - 1, got omega = {omega}, Lambda = {lambda}"
        )));
    }
    if p <= 0.0 {
        return Err(Error::InvalidInput(format!("power must be positive, got {p}")));
    }
    let l_r = lambda + omega - 1;
    let value = p * l_r as f64 / omega as f64;
    let mut entries = vec![0.0; l_r * lambda];
    for c in 0..lambda {
        for r in c..c + omega {
            entries[r * lambda + c] = value;
        }
    }
    BaseMatrix::new(l_r, lambda, entries)
}

/// The inner-block rate implied by the `(omega, Lambda)` rate loss:
/// `R_inner = R (Lambda + omega - 1)/Lambda`.
pub fn inner_rate(omega: usize, lambda: usize, rate_nats: f64) -> f64 {
    rate_nats * (lambda + omega - 1) as f64 / lambda as f64
}

struct Block {
    op: DesignOperator,
    scale: f64,
}

/// Block-structured spatially coupled design operator.
///
/// Block `(r, c)` reuses the per-section construction of [`DesignOperator`]
/// with its own seed, scaled so entries have variance `W_rc / L`.
pub struct ScDesign {
    base: BaseMatrix,
    params: SparcParams,
    m_r: usize,
    sections_per_block: usize,
    blocks: Vec<Option<Block>>,
}

impl ScDesign {
    pub fn new(base: BaseMatrix, params: &SparcParams, kind: DesignKind, seed: u64) -> Result<Self> {
        let (l_r, l_c) = (base.rows(), base.cols());
        if params.n % l_r != 0 {
            return Err(Error::Config(format!("L_R = {l_r} must divide n = {}", params.n)));
        }
        if params.l % l_c != 0 {
            return Err(Error::Config(format!("L_C = {l_c} must divide L = {}", params.l)));
        }
        if (base.average() - params.power).abs() > 1e-9 * params.power {
            return Err(Error::Config(format!(
                "base matrix averages {} but the power budget is {}",
                base.average(),
                params.power
            )));
        }
        let m_r = params.n / l_r;
        let sections_per_block = params.l / l_c;
        let block_params = SparcParams::with_exact_rate(m_r, sections_per_block, params.m, 1.0, 1.0)?;
        let mut blocks = Vec::with_capacity(l_r * l_c);
        for r in 0..l_r {
            for c in 0..l_c {
                let w = base.get(r, c);
                if w == 0.0 {
                    blocks.push(None);
                } else {
                    let op = DesignOperator::build(kind, &block_params, mix64(seed, (r * l_c + c) as u64))?;
                    let scale = (m_r as f64 * w / params.l as f64).sqrt();
                    blocks.push(Some(Block { op, scale }));
                }
            }
        }
        Ok(ScDesign { base, params: *params, m_r, sections_per_block, blocks })
    }

    pub fn base(&self) -> &BaseMatrix {
        &self.base
    }

    pub fn params(&self) -> &SparcParams {
        &self.params
    }

    pub fn rows_per_block(&self) -> usize {
        self.m_r
    }

    pub fn sections_per_block(&self) -> usize {
        self.sections_per_block
    }

    fn block(&self, r: usize, c: usize) -> Option<&Block> {
        self.blocks[r * self.base.cols() + c].as_ref()
    }

    /// Codeword of a message (all non-zero coefficients equal one).
    pub fn encode(&self, msg: &MessageVector) -> Result<Vec<f64>> {
        if msg.len() != self.params.l {
            return Err(Error::InvalidInput(format!(
                "message has {} sections, code has {}",
                msg.len(),
                self.params.l
            )));
        }
        let ones = vec![1.0; self.sections_per_block];
        let mut y = vec![0.0; self.params.n];
        for c in 0..self.base.cols() {
            let local = MessageVector::new(
                msg.sections()[c * self.sections_per_block..(c + 1) * self.sections_per_block]
                    .to_vec(),
                self.params.m,
            )?;
            for r in 0..self.base.rows() {
                if let Some(block) = self.block(r, c) {
                    let coeffs: Vec<f64> = ones.iter().map(|&v| v * block.scale).collect();
                    let part = block.op.encode(&local, &coeffs)?;
                    for (yi, &p) in y[r * self.m_r..(r + 1) * self.m_r].iter_mut().zip(&part) {
                        *yi += p;
                    }
                }
            }
        }
        Ok(y)
    }

    /// Dense application `A beta`.
    pub fn forward_dense(&self, beta: &[f64]) -> Vec<f64> {
        let m = self.params.m;
        let block_cols = self.sections_per_block * m;
        let mut y = vec![0.0; self.params.n];
        for c in 0..self.base.cols() {
            let beta_c = &beta[c * block_cols..(c + 1) * block_cols];
            for r in 0..self.base.rows() {
                if let Some(block) = self.block(r, c) {
                    let part = block.op.forward_dense(beta_c);
                    for (yi, &p) in y[r * self.m_r..(r + 1) * self.m_r].iter_mut().zip(&part) {
                        *yi += p * block.scale;
                    }
                }
            }
        }
        y
    }

    /// Adjoint with per-block weights: `((S ⊙ A))^T z`, where `weights` is
    /// `L_R x L_C` row-major (entries for zero blocks are ignored).
    pub fn weighted_adjoint(&self, z: &[f64], weights: &[f64]) -> Vec<f64> {
        let m = self.params.m;
        let block_cols = self.sections_per_block * m;
        let mut out = vec![0.0; self.params.l * m];
        for c in 0..self.base.cols() {
            let slot = &mut out[c * block_cols..(c + 1) * block_cols];
            for r in 0..self.base.rows() {
                if let Some(block) = self.block(r, c) {
                    let w = weights[r * self.base.cols() + c] * block.scale;
                    if w == 0.0 {
                        continue;
                    }
                    let part = block.op.adjoint(&z[r * self.m_r..(r + 1) * self.m_r]);
                    for (o, &p) in slot.iter_mut().zip(&part) {
                        *o += w * p;
                    }
                }
            }
        }
        out
    }
}

/// One step of the block state evolution.
#[derive(Debug, Clone, PartialEq)]
pub struct ScSeState {
    /// Residual variances per row block, `phi_r >= sigma^2`.
    pub phi: Vec<f64>,
    /// Per-column-block NMSE, in `[0, 1]`.
    pub psi: Vec<f64>,
    /// Effective section noise variances per column block.
    pub tau_c: Vec<f64>,
}

/// Block state-evolution trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct ScSeTrajectory {
    /// `states[t]` holds `(phi^t, psi^t, tau_c^t)`.
    pub states: Vec<ScSeState>,
    /// `psi` after the final update.
    pub final_psi: Vec<f64>,
}

impl ScSeTrajectory {
    /// Predicted per-block NMSE of the estimate after iteration `t`
    /// (1-based), i.e. `psi^{t}`.
    pub fn psi_after(&self, t: usize) -> &[f64] {
        if t < self.states.len() {
            &self.states[t].psi
        } else {
            &self.final_psi
        }
    }
}

/// Runs the SC state evolution: starting from `psi^0 = 1`,
///
/// ```text
/// phi_r^t   = sigma^2 + (1/L_C) sum_c W_rc psi_c^t
/// tau_c^t   = (R/ln M) / [(1/L_R) sum_r W_rc / phi_r^t]
/// psi_c^{t+1} = 1 - E(tau_c^t)
/// ```
///
/// with the expectation evaluated by Monte Carlo (`mc_samples` draws per
/// column block, common random numbers across iterations).
pub fn sc_se_trajectory(
    base: &BaseMatrix,
    rate_nats: f64,
    m: usize,
    sigma_sq: f64,
    mc_samples: usize,
    max_iters: usize,
    seed: u64,
) -> ScSeTrajectory {
    let (l_r, l_c) = (base.rows(), base.cols());
    let ln_m = (m as f64).ln();
    let mut psi = vec![1.0f64; l_c];
    let mut states = Vec::new();
    for t in 0..max_iters {
        let phi: Vec<f64> = (0..l_r)
            .map(|r| {
                sigma_sq + (0..l_c).map(|c| base.get(r, c) * psi[c]).sum::<f64>() / l_c as f64
            })
            .collect();
        let tau_c: Vec<f64> = (0..l_c)
            .map(|c| {
                let gain: f64 =
                    (0..l_r).map(|r| base.get(r, c) / phi[r]).sum::<f64>() / l_r as f64;
                rate_nats / (ln_m * gain)
            })
            .collect();
        states.push(ScSeState { phi, psi: psi.clone(), tau_c: tau_c.clone() });
        // Fresh streams per (iteration, column): reusing one sample set
        // across iterations lets a single unlucky draw stall a column for
        // the whole wave, biasing the predicted front position.
        let next: Vec<f64> = (0..l_c)
            .map(|c| {
                let mut rng = crate::rng::stream_rng2(seed, 0x5C5E ^ (t as u64) << 16, c as u64);
                let s = 1.0 / tau_c[c].sqrt();
                1.0 - sent_weight_mc(s, m, mc_samples.max(1), &mut rng)
            })
            .collect();
        let progress = psi
            .iter()
            .zip(&next)
            .map(|(&a, &b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        let done = next.iter().all(|&v| v < 1e-6);
        psi = next;
        if done || progress < 1e-6 {
            break;
        }
    }
    ScSeTrajectory { states, final_psi: psi }
}

/// SC-AMP configuration.
///
/// The online mode re-estimates the block variance profile from the current
/// estimate every iteration and is the robust default: locking the decoder
/// to the precomputed state-evolution schedule collapses whole trials
/// whenever the empirical decoding wave lags the predicted one by even an
/// iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct ScAmpConfig {
    pub max_iters: usize,
    /// Use online variance estimates instead of the state-evolution values.
    pub online_tau: bool,
    /// Monte-Carlo samples for the state evolution (SE mode).
    pub mc_samples: usize,
    /// Seed for the state-evolution sampler.
    pub se_seed: u64,
}

impl ScAmpConfig {
    pub fn online(max_iters: usize) -> Self {
        ScAmpConfig { max_iters, online_tau: true, mc_samples: 0, se_seed: 0 }
    }

    pub fn se_driven(max_iters: usize, mc_samples: usize, se_seed: u64) -> Self {
        ScAmpConfig { max_iters, online_tau: false, mc_samples, se_seed }
    }
}

/// SC-AMP result.
#[derive(Debug, Clone)]
pub struct ScAmpOutput {
    pub message: MessageVector,
    /// Final posterior weights (sections sum to one).
    pub beta: Vec<f64>,
    pub iterations: usize,
    /// State-evolution NMSE prediction aligned with each iterate (SE mode).
    pub psi_trajectory: Vec<Vec<f64>>,
}

/// Iterate view passed to observers.
pub struct ScAmpIterate<'a> {
    /// 0-based iteration index; `beta_after` is the `(t+1)`-th estimate.
    pub iteration: usize,
    pub beta_after: &'a [f64],
    /// Predicted per-block NMSE for this estimate (empty in online mode).
    pub psi_predicted: &'a [f64],
}

/// Decodes with SC-AMP, computing the state evolution internally.
pub fn sc_amp_decode(scd: &ScDesign, y: &[f64], config: &ScAmpConfig) -> Result<ScAmpOutput> {
    sc_amp_decode_with(scd, y, config, |_| {})
}

/// Decodes with SC-AMP, calling `observe` after each iteration.
pub fn sc_amp_decode_with(
    scd: &ScDesign,
    y: &[f64],
    config: &ScAmpConfig,
    observe: impl FnMut(&ScAmpIterate<'_>),
) -> Result<ScAmpOutput> {
    let params = scd.params();
    let se = if config.online_tau {
        None
    } else {
        Some(sc_se_trajectory(
            scd.base(),
            params.rate_nats,
            params.m,
            params.noise_var,
            config.mc_samples,
            config.max_iters,
            config.se_seed,
        ))
    };
    sc_amp_decode_inner(scd, y, se.as_ref(), config.max_iters, observe)
}

/// Decodes with SC-AMP against a precomputed state-evolution trajectory,
/// letting many trials share one trajectory.
pub fn sc_amp_decode_with_trajectory(
    scd: &ScDesign,
    y: &[f64],
    se: &ScSeTrajectory,
    max_iters: usize,
    observe: impl FnMut(&ScAmpIterate<'_>),
) -> Result<ScAmpOutput> {
    sc_amp_decode_inner(scd, y, Some(se), max_iters, observe)
}

fn sc_amp_decode_inner(
    scd: &ScDesign,
    y: &[f64],
    se: Option<&ScSeTrajectory>,
    max_iters: usize,
    mut observe: impl FnMut(&ScAmpIterate<'_>),
) -> Result<ScAmpOutput> {
    let params = *scd.params();
    let (l_r, l_c) = (scd.base().rows(), scd.base().cols());
    let (n, l, m) = (params.n, params.l, params.m);
    if y.len() != n {
        return Err(Error::InvalidInput(format!("y has length {}, expected {n}", y.len())));
    }
    let t_max = se
        .as_ref()
        .map(|s| s.states.len().min(max_iters))
        .unwrap_or(max_iters)
        .max(1);

    let m_r = scd.rows_per_block();
    let spb = scd.sections_per_block();
    let ln_m = (m as f64).ln();
    let mut beta = vec![0.0f64; l * m];
    let mut z = vec![0.0f64; n];
    let mut phi_prev: Vec<f64> = vec![0.0; l_r];
    let mut psi_trajectory = Vec::new();
    let mut iterations = 0;

    for t in 0..t_max {
        // Residual update, then this iteration's variance profile.
        let fit = scd.forward_dense(&beta);
        let (phi, tau_c): (Vec<f64>, Vec<f64>) = if let Some(se) = &se {
            let phi = se.states[t].phi.clone();
            let tau_c = se.states[t].tau_c.clone();
            for r in 0..l_r {
                let b = if t == 0 { 0.0 } else { (phi[r] - params.noise_var) / phi_prev[r] };
                for i in r * m_r..(r + 1) * m_r {
                    z[i] = y[i] - fit[i] + b * z[i];
                }
            }
            (phi, tau_c)
        } else {
            // Online: the Onsager numerator uses the per-block NMSE of the
            // current estimate, psi_hat_c = 1 - ||beta_c||^2 / (L/L_C),
            // through the variance functional; the denoiser then uses the
            // variance measured from the fresh residual itself.
            let psi_hat: Vec<f64> = (0..l_c)
                .map(|c| {
                    let bc = &beta[c * spb * m..(c + 1) * spb * m];
                    (1.0 - bc.iter().map(|&v| v * v).sum::<f64>() / spb as f64).max(0.0)
                })
                .collect();
            if t >= 1 && psi_hat.iter().all(|&v| v < 1e-9) {
                // Every block has collapsed onto a single column per section.
                break;
            }
            let phi_pred: Vec<f64> = (0..l_r)
                .map(|r| {
                    params.noise_var
                        + (0..l_c).map(|c| scd.base().get(r, c) * psi_hat[c]).sum::<f64>()
                            / l_c as f64
                })
                .collect();
            for r in 0..l_r {
                let b =
                    if t == 0 { 0.0 } else { (phi_pred[r] - params.noise_var) / phi_prev[r] };
                for i in r * m_r..(r + 1) * m_r {
                    z[i] = y[i] - fit[i] + b * z[i];
                }
            }
            let phi_meas: Vec<f64> = (0..l_r)
                .map(|r| {
                    let zr = &z[r * m_r..(r + 1) * m_r];
                    (zr.iter().map(|&v| v * v).sum::<f64>() / m_r as f64).max(1e-30)
                })
                .collect();
            let tau: Vec<f64> = (0..l_c)
                .map(|c| {
                    let gain: f64 = (0..l_r)
                        .map(|r| scd.base().get(r, c) / phi_meas[r])
                        .sum::<f64>()
                        / l_r as f64;
                    params.rate_nats / (ln_m * gain)
                })
                .collect();
            (phi_meas, tau)
        };

        // stat = beta + (S ⊙ A)^T z with S_rc = tau_c / phi_r.
        let mut weights = vec![0.0f64; l_r * l_c];
        for r in 0..l_r {
            for c in 0..l_c {
                weights[r * l_c + c] = tau_c[c] / phi[r];
            }
        }
        let mut stat = scd.weighted_adjoint(&z, &weights);
        for (s, &b) in stat.iter_mut().zip(&beta) {
            *s += b;
        }

        // Sectionwise softmax at temperature tau_c (0/1-valued prior).
        for sec in 0..l {
            let c = sec / spb;
            let inv_tau = 1.0 / tau_c[c];
            let section = &stat[sec * m..(sec + 1) * m];
            let top = section.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b * inv_tau));
            let slot = &mut beta[sec * m..(sec + 1) * m];
            let mut denom = 0.0;
            for (o, &s) in slot.iter_mut().zip(section) {
                let w = (s * inv_tau - top).exp();
                *o = w;
                denom += w;
            }
            for o in slot.iter_mut() {
                *o /= denom;
            }
        }
        if beta.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence { iteration: t });
        }
        iterations = t + 1;
        let psi_pred: &[f64] = se.as_ref().map(|s| s.psi_after(t + 1)).unwrap_or(&[]);
        observe(&ScAmpIterate { iteration: t, beta_after: &beta, psi_predicted: psi_pred });
        if !psi_pred.is_empty() {
            psi_trajectory.push(psi_pred.to_vec());
        }
        phi_prev = phi;
    }

    Ok(ScAmpOutput {
        message: crate::amp::harden(&beta, l, m),
        beta,
        iterations,
        psi_trajectory,
    })
}

/// Closed-form asymptotic decoding progression for `(omega, Lambda)` codes.
#[derive(Debug, Clone, PartialEq)]
pub enum ScProgression {
    /// The rate is outside `R < ln(1 + kappa snr)/(2 kappa)`; the closed
    /// forms say nothing here.
    HypothesisViolated { rate_bound_nats: f64 },
    Evaluated {
        /// Whether decoding starts: `omega` exceeds the threshold below.
        can_start: bool,
        /// Minimal coupling width `(1/(e^{2 R kappa} - 1) - 1/(kappa snr))^{-1}`.
        omega_threshold: f64,
        /// Lower bound on the columns decoded per end in the first iteration.
        c_star_lower_bound: usize,
        /// `ceil(Lambda / (2 c*))`, an upper bound on iterations to full
        /// decoding (present when decoding can start; at least one column
        /// per end decodes each iteration, so `c*` is floored at 1).
        max_iterations: Option<usize>,
    },
}

pub fn sc_progression(
    omega: usize,
    lambda: usize,
    rate_nats: f64,
    snr: f64,
) -> Result<ScProgression> {
    if omega < 1 || lambda < 2 * omega - 1 {
        return Err(Error::InvalidInput(format!(
            "need omega >= 1 and Lambda >= 2 omega - 1, got omega = {omega}, Lambda = {lambda}"
        )));
    }
    let kappa = (lambda + omega - 1) as f64 / lambda as f64;
    let ksnr = kappa * snr;
    let rate_bound = (1.0 + ksnr).ln() / (2.0 * kappa);
    if !(rate_nats < rate_bound) {
        return Ok(ScProgression::HypothesisViolated { rate_bound_nats: rate_bound });
    }
    let inner = 1.0 / ((2.0 * rate_nats * kappa).exp() - 1.0) - 1.0 / ksnr;
    let omega_threshold = 1.0 / inner;
    let can_start = (omega as f64) > omega_threshold;
    let c_star_raw =
        (omega as f64 * (1.0 + ksnr) / (ksnr * ksnr) * ((1.0 + ksnr).ln() - 2.0 * rate_nats * kappa))
            .floor() as usize;
    let c_star = c_star_raw.min(omega - 1);
    let max_iterations = can_start
        .then(|| (lambda as f64 / (2.0 * c_star.max(1) as f64)).ceil() as usize);
    Ok(ScProgression::Evaluated { can_start, omega_threshold, c_star_lower_bound: c_star, max_iterations })
}
