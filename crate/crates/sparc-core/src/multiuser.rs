//! Multiuser code assembly: broadcast and multiple-access codes built by
//! concatenating point-to-point SPARCs, codebook binning, and toy Wyner-Ziv
//! / Gelfand-Pinsker pipelines driven by the exhaustive oracle.

use crate::design::{DesignOperator, Operator};
use crate::error::{Error, Result};
use crate::message::MessageVector;
use crate::oracle::{exhaustive_nearest, SearchBudget};
use crate::params::SparcParams;
use crate::power::{partition_mac, MacPartition, PowerAllocation};
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

/// Two-user broadcast code: design matrix `A = [A_2 A_1]` (the weaker user's
/// sections first). Receiver 2 decodes the `A_2` prefix against noise plus
/// user-1 interference; receiver 1 decodes the whole code.
#[derive(Debug, Clone)]
pub struct BroadcastCode {
    /// User 1 point-to-point parameters `(n, L_1, M, R_1, P_1, sigma_1^2)`.
    pub user1: SparcParams,
    /// User 2 effective-channel parameters: noise variance includes the
    /// user-1 interference power.
    pub user2: SparcParams,
    pub alloc1: PowerAllocation,
    pub alloc2: PowerAllocation,
    /// Joint code seen by receiver 1.
    pub joint: SparcParams,
    /// User-2 allocation followed by user-1's.
    pub alloc_joint: PowerAllocation,
}

impl BroadcastCode {
    /// Joint message with user 2's sections first.
    pub fn assemble(&self, msg1: &MessageVector, msg2: &MessageVector) -> Result<MessageVector> {
        if msg1.len() != self.user1.l || msg2.len() != self.user2.l {
            return Err(Error::InvalidInput("message lengths do not match the code".into()));
        }
        let mut sections = msg2.sections().to_vec();
        sections.extend_from_slice(msg1.sections());
        MessageVector::new(sections, self.joint.m)
    }

    /// Splits a joint message into `(user 1, user 2)` parts.
    pub fn split(&self, joint: &MessageVector) -> (MessageVector, MessageVector) {
        let l2 = self.user2.l;
        let m = self.joint.m;
        let msg2 = MessageVector::new(joint.sections()[..l2].to_vec(), m).unwrap();
        let msg1 = MessageVector::new(joint.sections()[l2..].to_vec(), m).unwrap();
        (msg1, msg2)
    }
}

/// Derives the two users' code parameters for the broadcast setup of a
/// power split `alpha` and rate back-off `gamma`: user `i` gets rate
/// `gamma C_i` rounded down to a whole number of sections.
pub fn bc_design(
    n: usize,
    m: usize,
    power: f64,
    sigma1_sq: f64,
    sigma2_sq: f64,
    alpha: f64,
    gamma: f64,
) -> Result<(SparcParams, SparcParams)> {
    if !(0.0..=1.0).contains(&alpha) || !(0.0..=1.0).contains(&gamma) {
        return Err(Error::InvalidInput(format!(
            "need alpha, gamma in [0,1], got alpha={alpha}, gamma={gamma}"
        )));
    }
    let p1 = alpha * power;
    let p2 = (1.0 - alpha) * power;
    let c1 = 0.5 * (1.0 + p1 / sigma1_sq).ln();
    let c2 = 0.5 * (1.0 + p2 / (p1 + sigma2_sq)).ln();
    let ln_m = (m as f64).ln();
    let l1 = (n as f64 * gamma * c1 / ln_m).floor() as usize;
    let l2 = (n as f64 * gamma * c2 / ln_m).floor() as usize;
    if l1 == 0 || l2 == 0 || p1 <= 0.0 || p2 <= 0.0 {
        return Err(Error::Config(format!(
            "degenerate power split: alpha = {alpha} leaves a user with no sections or no power"
        )));
    }
    let r1 = l1 as f64 * ln_m / n as f64;
    let r2 = l2 as f64 * ln_m / n as f64;
    let params1 = SparcParams::with_block_length(n, l1, m, r1, p1, sigma1_sq)?;
    let params2 = SparcParams::with_block_length(n, l2, m, r2, p2, sigma2_sq + p1)?;
    Ok((params1, params2))
}

/// Assembles a broadcast code from per-user parameters and allocations.
/// `user2.noise_var` must already include the user-1 interference.
pub fn bc_build(
    user1: &SparcParams,
    user2: &SparcParams,
    alloc1: PowerAllocation,
    alloc2: PowerAllocation,
    sigma1_sq: f64,
) -> Result<BroadcastCode> {
    if user1.n != user2.n || user1.m != user2.m {
        return Err(Error::Config(format!(
            "users disagree on geometry: n = {}/{}, M = {}/{}",
            user1.n, user2.n, user1.m, user2.m
        )));
    }
    if alloc1.len() != user1.l || alloc2.len() != user2.l {
        return Err(Error::InvalidInput("allocation lengths do not match the users".into()));
    }
    let mut joint_values = alloc2.values().to_vec();
    joint_values.extend_from_slice(alloc1.values());
    let joint = SparcParams::with_block_length(
        user1.n,
        user1.l + user2.l,
        user1.m,
        user1.rate_nats + user2.rate_nats,
        user1.power + user2.power,
        sigma1_sq,
    )?;
    Ok(BroadcastCode {
        user1: *user1,
        user2: *user2,
        alloc1,
        alloc2,
        joint,
        alloc_joint: PowerAllocation::from_values(joint_values),
    })
}

/// Two-user multiple-access code: one combined SPARC decoded jointly, with
/// sections partitioned between the transmitters by the bracket rule.
#[derive(Debug, Clone)]
pub struct MacCode {
    pub user1: SparcParams,
    pub user2: SparcParams,
    pub joint: SparcParams,
    pub alloc_joint: PowerAllocation,
    pub partition: MacPartition,
}

impl MacCode {
    /// Joint message: user `i`'s `k`-th section goes to their `k`-th
    /// assigned section of the combined code.
    pub fn assemble(&self, msg1: &MessageVector, msg2: &MessageVector) -> Result<MessageVector> {
        if msg1.len() != self.user1.l || msg2.len() != self.user2.l {
            return Err(Error::InvalidInput("message lengths do not match the code".into()));
        }
        let mut sections = vec![0usize; self.joint.l];
        for (k, &sec) in self.partition.sections_of(0).iter().enumerate() {
            sections[sec] = msg1.sections()[k];
        }
        for (k, &sec) in self.partition.sections_of(1).iter().enumerate() {
            sections[sec] = msg2.sections()[k];
        }
        MessageVector::new(sections, self.joint.m)
    }

    /// Per-user messages out of a joint decode.
    pub fn split(&self, joint: &MessageVector) -> (MessageVector, MessageVector) {
        let m = self.joint.m;
        let take = |user: usize| {
            MessageVector::new(
                self.partition.sections_of(user).iter().map(|&s| joint.sections()[s]).collect(),
                m,
            )
            .unwrap()
        };
        (take(0), take(1))
    }
}

/// Derives symmetric-rate MAC user parameters: sum rate `gamma C_sum`, user
/// 1 taking the fraction `alpha` of it.
pub fn mac_design(
    n: usize,
    m: usize,
    p1: f64,
    p2: f64,
    sigma_sq: f64,
    alpha: f64,
    gamma: f64,
) -> Result<(SparcParams, SparcParams)> {
    if !(0.0..=1.0).contains(&alpha) || !(0.0..=1.0).contains(&gamma) {
        return Err(Error::InvalidInput(format!(
            "need alpha, gamma in [0,1], got alpha={alpha}, gamma={gamma}"
        )));
    }
    let c_sum = 0.5 * (1.0 + (p1 + p2) / sigma_sq).ln();
    let ln_m = (m as f64).ln();
    let l1 = (n as f64 * gamma * alpha * c_sum / ln_m).floor() as usize;
    let l2 = (n as f64 * gamma * (1.0 - alpha) * c_sum / ln_m).floor() as usize;
    if l1 == 0 || l2 == 0 {
        return Err(Error::Config("a user has no sections at this rate split".into()));
    }
    let params1 =
        SparcParams::with_block_length(n, l1, m, l1 as f64 * ln_m / n as f64, p1, sigma_sq)?;
    let params2 =
        SparcParams::with_block_length(n, l2, m, l2 as f64 * ln_m / n as f64, p2, sigma_sq)?;
    Ok((params1, params2))
}

/// Builds the combined MAC code and partitions `alloc_joint` between users.
pub fn mac_build(
    user1: &SparcParams,
    user2: &SparcParams,
    alloc_joint: PowerAllocation,
) -> Result<MacCode> {
    if user1.n != user2.n || user1.m != user2.m {
        return Err(Error::Config(format!(
            "users disagree on geometry: n = {}/{}, M = {}/{}",
            user1.n, user2.n, user1.m, user2.m
        )));
    }
    if user1.noise_var != user2.noise_var {
        return Err(Error::Config("users must share the channel noise variance".into()));
    }
    let joint = SparcParams::with_block_length(
        user1.n,
        user1.l + user2.l,
        user1.m,
        user1.rate_nats + user2.rate_nats,
        user1.power + user2.power,
        user1.noise_var,
    )?;
    let partition = partition_mac(&alloc_joint, user1.l, user2.l, user1.power, user2.power)?;
    Ok(MacCode { user1: *user1, user2: *user2, joint, alloc_joint, partition })
}

/// Choice of one sub-section (bin component) per section.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinSpec {
    pub m: usize,
    pub m_prime: usize,
    /// One sub-section index in `[0, M/M')` per section.
    pub bin_index: Vec<usize>,
}

impl BinSpec {
    pub fn new(m: usize, m_prime: usize, bin_index: Vec<usize>) -> Result<Self> {
        if m_prime == 0 || m % m_prime != 0 {
            return Err(Error::Config(format!("M' = {m_prime} must divide M = {m}")));
        }
        let bins = m / m_prime;
        if let Some(&bad) = bin_index.iter().find(|&&b| b >= bins) {
            return Err(Error::InvalidInput(format!("bin index {bad} out of range ({bins} bins)")));
        }
        Ok(BinSpec { m, m_prime, bin_index })
    }

    /// Number of sub-sections per section.
    pub fn bins_per_section(&self) -> usize {
        self.m / self.m_prime
    }

    /// Rate carried by the bin index: `L ln(M/M') / n` nats.
    pub fn bin_rate_nats(&self, n: usize) -> f64 {
        self.bin_index.len() as f64 * (self.bins_per_section() as f64).ln() / n as f64
    }
}

/// The sub-code selected by a [`BinSpec`]: a view with `M'` columns per
/// section, indexing into the parent operator's columns.
pub struct BinView<'a> {
    inner: &'a DesignOperator,
    spec: BinSpec,
}

/// Restricts an operator to the chosen sub-sections.
pub fn bin_submatrix<'a>(op: &'a DesignOperator, spec: BinSpec) -> Result<BinView<'a>> {
    if spec.m != op.m() {
        return Err(Error::Config(format!(
            "bin spec is for M = {}, operator has M = {}",
            spec.m,
            op.m()
        )));
    }
    if spec.bin_index.len() != op.sections() {
        return Err(Error::InvalidInput(format!(
            "bin spec covers {} sections, operator has {}",
            spec.bin_index.len(),
            op.sections()
        )));
    }
    Ok(BinView { inner: op, spec })
}

impl BinView<'_> {
    fn parent_col(&self, section: usize, col: usize) -> usize {
        self.spec.bin_index[section] * self.spec.m_prime + col
    }

    /// Global column indices of a message within this bin.
    pub fn globalize(&self, msg: &MessageVector) -> MessageVector {
        MessageVector::new(
            msg.sections()
                .iter()
                .enumerate()
                .map(|(sec, &j)| self.parent_col(sec, j))
                .collect(),
            self.inner.m(),
        )
        .unwrap()
    }
}

impl Operator for BinView<'_> {
    fn n(&self) -> usize {
        self.inner.n()
    }

    fn sections(&self) -> usize {
        self.inner.sections()
    }

    fn m(&self) -> usize {
        self.spec.m_prime
    }

    fn encode(&self, msg: &MessageVector, coeffs: &[f64]) -> Result<Vec<f64>> {
        self.inner.encode(&self.globalize(msg), coeffs)
    }

    fn forward_dense(&self, beta: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n()];
        let mut col = vec![0.0; self.n()];
        let mp = self.spec.m_prime;
        for sec in 0..self.sections() {
            for j in 0..mp {
                let w = beta[sec * mp + j];
                if w != 0.0 {
                    self.column_into(sec, j, &mut col);
                    for (yi, &a) in y.iter_mut().zip(&col) {
                        *yi += w * a;
                    }
                }
            }
        }
        y
    }

    fn adjoint(&self, v: &[f64]) -> Vec<f64> {
        let mp = self.spec.m_prime;
        let mut out = vec![0.0; self.sections() * mp];
        for sec in 0..self.sections() {
            let full = self.inner.adjoint_section(sec, v);
            let off = self.spec.bin_index[sec] * mp;
            out[sec * mp..(sec + 1) * mp].copy_from_slice(&full[off..off + mp]);
        }
        out
    }

    fn adjoint_section(&self, section: usize, v: &[f64]) -> Vec<f64> {
        let full = self.inner.adjoint_section(section, v);
        let off = self.spec.bin_index[section] * self.spec.m_prime;
        full[off..off + self.spec.m_prime].to_vec()
    }

    fn column_norm_sq(&self, section: usize, col: usize) -> f64 {
        self.inner.column_norm_sq(section, self.parent_col(section, col))
    }

    fn column_into(&self, section: usize, col: usize, out: &mut [f64]) {
        self.inner.column_into(section, self.parent_col(section, col), out)
    }
}

/// Wyner-Ziv toy configuration (decoder side information `Y = X + Z`).
#[derive(Debug, Clone)]
pub struct WzConfig {
    pub l: usize,
    pub m: usize,
    pub m_prime: usize,
    pub n: usize,
    /// Source variance `sigma^2`.
    pub source_var: f64,
    /// Side-information noise variance `N`.
    pub side_noise_var: f64,
    /// Target distortion `D`, strictly below `Var(X|Y)`.
    pub distortion_target: f64,
    pub design_seed: u64,
    pub budget: SearchBudget,
}

#[derive(Debug, Clone)]
pub struct WzOutput {
    pub reconstruction: Vec<f64>,
    pub distortion: f64,
    /// Transmitted bin indices, one per section.
    pub bin_message: Vec<usize>,
    /// Test-channel variance `Q`.
    pub q: f64,
    /// Rate actually spent on the bin index, in nats.
    pub bin_rate_nats: f64,
}

/// Full Wyner-Ziv pipeline at toy scale: quantize `x` with the exhaustive
/// oracle over the full code, transmit the bin index, decode within the bin
/// against the side information `y`, and MMSE-combine.
pub fn wz_toy(cfg: &WzConfig, x: &[f64], y: &[f64]) -> Result<WzOutput> {
    let var_xy =
        cfg.source_var * cfg.side_noise_var / (cfg.source_var + cfg.side_noise_var);
    if !(cfg.distortion_target < var_xy) {
        return Err(Error::InvalidInput(format!(
            "target distortion {} must lie strictly below Var(X|Y) = {var_xy}",
            cfg.distortion_target
        )));
    }
    if x.len() != cfg.n || y.len() != cfg.n {
        return Err(Error::InvalidInput("source/side-information length mismatch".into()));
    }
    let q = 1.0 / (1.0 / cfg.distortion_target - 1.0 / var_xy);
    // Codebook marginal: U' ~ N(0, sigma^4/(sigma^2+Q)).
    let u_var = cfg.source_var * cfg.source_var / (cfg.source_var + q);
    let params = SparcParams::with_exact_rate(cfg.n, cfg.l, cfg.m, u_var, 1.0)?;
    let alloc = PowerAllocation::from_values(vec![u_var / cfg.l as f64; cfg.l]);
    let op = DesignOperator::build(crate::design::DesignKind::Gaussian, &params, cfg.design_seed)?;

    // Encoder: nearest codeword to the source, then keep only its bin.
    let beta_star = exhaustive_nearest(&op, x, &alloc, &cfg.budget)?;
    let bins: Vec<usize> = beta_star.sections().iter().map(|&j| j / cfg.m_prime).collect();
    let spec = BinSpec::new(cfg.m, cfg.m_prime, bins.clone())?;
    let bin_rate = spec.bin_rate_nats(cfg.n);
    let view = bin_submatrix(&op, spec)?;

    // Decoder: nearest codeword to the side information, inside the bin.
    let beta_hat = exhaustive_nearest(&view, y, &alloc, &cfg.budget)?;
    let u_hat = view.encode(&beta_hat, &alloc.coefficients(cfg.n))?;

    let gain = 1.0 / (1.0 / q + 1.0 / cfg.source_var + 1.0 / cfg.side_noise_var);
    let reconstruction: Vec<f64> = u_hat
        .iter()
        .zip(y)
        .map(|(&u, &yi)| gain * (u / q + yi / cfg.side_noise_var))
        .collect();
    let distortion = x
        .iter()
        .zip(&reconstruction)
        .map(|(&a, &b)| (a - b) * (a - b))
        .sum::<f64>()
        / cfg.n as f64;
    Ok(WzOutput { reconstruction, distortion, bin_message: bins, q, bin_rate_nats: bin_rate })
}

/// Gelfand-Pinsker toy configuration (channel `Y = X + S + Z`, state `S`
/// known at the encoder).
#[derive(Debug, Clone)]
pub struct GpConfig {
    pub l: usize,
    pub m: usize,
    pub m_prime: usize,
    pub n: usize,
    /// Input power constraint `P`.
    pub power: f64,
    /// State variance `sigma_s^2`.
    pub state_var: f64,
    /// Channel noise variance `N`.
    pub channel_noise_var: f64,
    pub design_seed: u64,
    pub budget: SearchBudget,
}

#[derive(Debug, Clone)]
pub struct GpOutput {
    pub decoded_bins: Vec<usize>,
    /// `alpha = P/(P+N)`.
    pub alpha: f64,
    pub correct: bool,
    /// Realized input power of the transmitted sequence.
    pub x_power: f64,
}

/// Full Gelfand-Pinsker pipeline: quantize the state inside the message's
/// bin, transmit the dirty-paper combination, decode over the full code and
/// read off the bin index.
///
/// Decoding searches against the effective received codeword gain, which
/// stays finite as `sigma_s^2 -> 0` (where the scheme reduces to plain AWGN
/// coding of the bin index).
pub fn gp_toy(cfg: &GpConfig, w_bins: &[usize], state: &[f64], noise: &[f64]) -> Result<GpOutput> {
    if state.len() != cfg.n || noise.len() != cfg.n {
        return Err(Error::InvalidInput("state/noise length mismatch".into()));
    }
    if w_bins.len() != cfg.l {
        return Err(Error::InvalidInput(format!(
            "message has {} bins, code has {} sections",
            w_bins.len(),
            cfg.l
        )));
    }
    let alpha = cfg.power / (cfg.power + cfg.channel_noise_var);
    let denom = cfg.power + alpha * alpha * cfg.state_var;
    // U' codebook value and the effective transmitted / received values.
    let per_l = cfg.n as f64 / cfg.l as f64;
    let c_enc = (per_l * alpha * alpha * cfg.state_var * cfg.state_var / denom).sqrt();
    let c_transmit = (per_l * denom).sqrt();
    let c_received = c_transmit + (1.0 - alpha) * c_enc;

    let params = SparcParams::with_exact_rate(cfg.n, cfg.l, cfg.m, cfg.power, 1.0)?;
    let op = DesignOperator::build(crate::design::DesignKind::Gaussian, &params, cfg.design_seed)?;
    let spec = BinSpec::new(cfg.m, cfg.m_prime, w_bins.to_vec())?;
    let view = bin_submatrix(&op, spec)?;

    // Encoder: quantize the state inside bin W with the U' codebook.
    let enc_alloc = PowerAllocation::from_values(vec![c_enc * c_enc / cfg.n as f64; cfg.l]);
    let beta_star = exhaustive_nearest(&view, state, &enc_alloc, &cfg.budget)?;
    let scaled_u = view.encode(&beta_star, &vec![c_transmit; cfg.l])?;
    let x: Vec<f64> = scaled_u.iter().zip(state).map(|(&u, &s)| u - alpha * s).collect();
    let x_power = x.iter().map(|&v| v * v).sum::<f64>() / cfg.n as f64;

    let y: Vec<f64> = x
        .iter()
        .zip(state)
        .zip(noise)
        .map(|((&xi, &si), &zi)| xi + si + zi)
        .collect();

    // Decoder: nearest codeword over the full code at the received gain.
    let dec_alloc =
        PowerAllocation::from_values(vec![c_received * c_received / cfg.n as f64; cfg.l]);
    let beta_hat = exhaustive_nearest(&op, &y, &dec_alloc, &cfg.budget)?;
    let decoded_bins: Vec<usize> =
        beta_hat.sections().iter().map(|&j| j / cfg.m_prime).collect();
    let correct = decoded_bins == w_bins;
    Ok(GpOutput { decoded_bins, alpha, correct, x_power })
}
