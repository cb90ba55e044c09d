//! State evolution: deterministic prediction of AMP decoding progress.
//!
//! The scalar recursion tracks `x_t`, the expected power-weighted fraction of
//! correctly decodable sections, and the effective noise variance
//! `tau_t^2 = sigma^2 + P (1 - x_t)`, starting from `x_0 = 0`.

use crate::error::{Error, Result};
use crate::params::SparcParams;
use crate::power::PowerAllocation;
use crate::rng::stream_rng2;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;
use rand_distr::StandardNormal;

/// Standard normal CDF.
pub fn phi(x: f64) -> f64 {
    0.5 * libm::erfc(-x / core::f64::consts::SQRT_2)
}

/// Predicted decoder progress: `x_t`, `tau_t^2` pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct SeTrajectory {
    /// `x_0 = 0, x_1, ...` — power-weighted decodable fraction per iteration.
    pub x: Vec<f64>,
    /// `tau_t^2 = sigma^2 + P (1 - x_t)`, same length as `x`.
    pub tau_sq: Vec<f64>,
    /// Index of the last computed step.
    pub terminal_iteration: usize,
}

impl SeTrajectory {
    /// Per-iteration NMSE prediction `1 - x_t` for `t = 1..`.
    pub fn nmse(&self) -> Vec<f64> {
        self.x.iter().skip(1).map(|&x| 1.0 - x).collect()
    }
}

/// Update rule for one state-evolution step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SeMode {
    /// Soft-decision update: the expectation in the denoiser recursion is
    /// evaluated by Monte Carlo.
    Soft,
    /// Hard-decision (thresholding) update with threshold `sqrt(2 ln M) + a`.
    Hard { a: f64 },
}

/// Expected sent-term posterior weight under statistic `s (U_1 + s)` against
/// `M - 1` competitors `s U_j`:
///
/// `E[ e^{s(U_1+s)} / (e^{s(U_1+s)} + sum_{j=2}^M e^{s U_j}) ]`.
///
/// This is the per-section building block of both the scalar recursion
/// (with `s = sqrt(n P_l)/tau`) and the spatially coupled one (with
/// `s = 1/sqrt(tau_c)`).
pub fn sent_weight_mc(s: f64, m: usize, samples: usize, rng: &mut impl Rng) -> f64 {
    if s == 0.0 {
        return 1.0 / m as f64;
    }
    // Beyond this shift the sent term wins with probability 1 - O(1e-12).
    let clamp = (2.0 * (m as f64).ln()).sqrt() + 8.0;
    if s >= clamp {
        return 1.0;
    }
    let mut acc = 0.0;
    for _ in 0..samples {
        let u1: f64 = rng.sample(StandardNormal);
        let num = (s * (u1 + s)).exp();
        let mut denom = num;
        for _ in 1..m {
            let u: f64 = rng.sample(StandardNormal);
            denom += (s * u).exp();
        }
        acc += num / denom;
    }
    acc / samples as f64
}

/// Soft-decision expectation `x(tau)` for a full allocation. Sections with
/// equal power share one Monte-Carlo sample set.
fn x_soft(
    alloc: &PowerAllocation,
    params: &SparcParams,
    tau_sq: f64,
    mc_samples: usize,
    seed: u64,
) -> f64 {
    let tau = tau_sq.sqrt();
    let total = alloc.total();
    let mut x = 0.0;
    let mut group_start = 0;
    let mut group_id = 0u64;
    let values = alloc.values();
    while group_start < values.len() {
        let p = values[group_start];
        let mut group_end = group_start + 1;
        while group_end < values.len() && values[group_end] == p {
            group_end += 1;
        }
        if p > 0.0 {
            let s = (params.n as f64 * p).sqrt() / tau;
            let mut rng = stream_rng2(seed, 0x5E, group_id);
            let w = sent_weight_mc(s, params.m, mc_samples, &mut rng);
            let mass: f64 = (group_end - group_start) as f64 * p / total;
            x += mass * w;
        }
        group_id += 1;
        group_start = group_end;
    }
    x
}

/// Hard-decision expectation: power-weighted mass of sections whose shifted
/// statistic clears the threshold `sqrt(2 ln M) + a`.
fn x_hard(alloc: &PowerAllocation, params: &SparcParams, tau_sq: f64, a: f64) -> f64 {
    let threshold = (2.0 * (params.m as f64).ln()).sqrt() + a;
    let total = alloc.total();
    alloc
        .values()
        .iter()
        .map(|&p| p / total * phi((params.n as f64 * p / tau_sq).sqrt() - threshold))
        .sum()
}

/// Computes the state-evolution trajectory, stopping when the per-step gain
/// drops below `1e-6` or after `max_iters` steps.
///
/// Soft mode draws `mc_samples` i.i.d. standard-normal vectors per
/// power-group per step, with common random numbers across iterations.
pub fn se_trajectory(
    alloc: &PowerAllocation,
    params: &SparcParams,
    mode: SeMode,
    mc_samples: usize,
    max_iters: usize,
    seed: u64,
) -> SeTrajectory {
    let mut x = Vec::with_capacity(max_iters + 1);
    let mut tau_sq = Vec::with_capacity(max_iters + 1);
    x.push(0.0);
    tau_sq.push(params.noise_var + params.power);
    for _ in 0..max_iters {
        let tau = *tau_sq.last().unwrap();
        let next = match mode {
            SeMode::Soft => x_soft(alloc, params, tau, mc_samples.max(1), seed),
            SeMode::Hard { a } => x_hard(alloc, params, tau, a),
        };
        let gain = next - *x.last().unwrap();
        x.push(next);
        tau_sq.push(params.noise_var + params.power * (1.0 - next));
        if gain < 1e-6 {
            break;
        }
    }
    let terminal_iteration = x.len() - 1;
    SeTrajectory { x, tau_sq, terminal_iteration }
}

/// Closed-form asymptotic state evolution for the exponential allocation:
/// `xi_t = min(xi_{t-1} + ln(C/R)/(2C), 1)` starting from `xi_{-1} = 0`,
/// together with `T* = ceil(2C / ln(C/R))`, the step count until `xi = 1`.
///
/// The returned sequence starts at `xi_{-1} = 0` and ends at the first 1.
pub fn se_asymptotic_exponential(rate_nats: f64, snr: f64) -> Result<(Vec<f64>, usize)> {
    let c = 0.5 * (1.0 + snr).ln();
    if !(rate_nats > 0.0) || rate_nats >= c {
        return Err(Error::InvalidInput(alloc::format!(
            "asymptotic SE needs 0 < R < C, got R = {rate_nats}, C = {c}"
        )));
    }
    let step = (c / rate_nats).ln() / (2.0 * c);
    let t_star = (2.0 * c / (c / rate_nats).ln()).ceil() as usize;
    let mut xi = alloc::vec![0.0];
    while *xi.last().unwrap() < 1.0 {
        xi.push((xi.last().unwrap() + step).min(1.0));
    }
    Ok((xi, t_star))
}

/// Fraction of power in sections decodable at effective variance `tau_sq`:
/// the mass of sections with `L P_l > 2 R tau^2` (strict inequality).
pub fn se_decodable_fraction(alloc: &PowerAllocation, rate_nats: f64, tau_sq: f64) -> f64 {
    let l = alloc.len() as f64;
    let total = alloc.total();
    let threshold = 2.0 * rate_nats * tau_sq;
    alloc.values().iter().filter(|&&p| l * p > threshold).map(|&p| p / total).sum()
}

/// State-evolution prediction of the final section error rate:
/// `1 - (1/L) sum_l E_U[ Phi(sqrt(n P_l)/sigma + U) ]^{M-1}`,
/// estimated with `mc_samples` draws of `U` per section. Returns the
/// estimate and its standard error.
pub fn se_predicted_ser(
    alloc: &PowerAllocation,
    params: &SparcParams,
    mc_samples: usize,
    seed: u64,
) -> (f64, f64) {
    let sigma = params.noise_var.sqrt();
    let l = alloc.len();
    let samples = mc_samples.max(2);
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for k in 0..samples {
        let mut rng = stream_rng2(seed, 0x5E12, k as u64);
        let mut ser = 0.0;
        for &p in alloc.values() {
            let shift = (params.n as f64 * p).sqrt() / sigma;
            let u: f64 = rng.sample(StandardNormal);
            ser += 1.0 - pow_cdf(phi(shift + u), params.m - 1);
        }
        ser /= l as f64;
        let delta = ser - mean;
        mean += delta / (k + 1) as f64;
        m2 += delta * (ser - mean);
    }
    let var = m2 / (samples - 1) as f64;
    (mean, (var / samples as f64).sqrt())
}

/// `c^k` computed as `exp(k ln c)` for accuracy near `c = 1`.
fn pow_cdf(c: f64, k: usize) -> f64 {
    if c <= 0.0 {
        return 0.0;
    }
    (k as f64 * c.ln()).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::power::{alloc_exponential, alloc_flat};

    #[test]
    fn trajectory_starts_at_sigma_sq_plus_p() {
        let p = SparcParams::new(16, 4, 0.5, 3.0, 0.5).unwrap();
        let alloc = alloc_flat(&p);
        let t = se_trajectory(&alloc, &p, SeMode::Hard { a: 0.5 }, 1, 5, 0);
        assert_eq!(t.x[0], 0.0);
        assert_eq!(t.tau_sq[0], 3.5);
    }

    #[test]
    fn trajectory_identity_holds_everywhere() {
        let p = SparcParams::new(64, 32, 0.6, 8.0, 1.0).unwrap();
        let alloc = alloc_exponential(&p);
        let t = se_trajectory(&alloc, &p, SeMode::Soft, 64, 12, 7);
        assert_eq!(t.x.len(), t.tau_sq.len());
        for (x, tau) in t.x.iter().zip(&t.tau_sq) {
            assert_eq!(*tau, p.noise_var + p.power * (1.0 - x));
        }
        // x is non-decreasing.
        for w in t.x.windows(2) {
            assert!(w[1] >= w[0] - 1e-12);
        }
    }

    #[test]
    fn subcritical_flat_allocation_makes_no_progress() {
        // L P_l = P = 1 well below 2 R tau_0^2 = 5; with large M the first
        // step decodes essentially nothing.
        let p = SparcParams::new(4, 1 << 16, 1.25, 1.0, 1.0).unwrap();
        let alloc = alloc_flat(&p);
        let t = se_trajectory(&alloc, &p, SeMode::Soft, 200, 1, 3);
        assert!(t.x[1] < 0.01, "x_1 = {}", t.x[1]);
    }

    #[test]
    fn hard_mode_threshold_ordering() {
        // Smaller threshold offset a decodes more in every iteration.
        let p = SparcParams::new(256, 64, 0.7 * 0.5 * 16f64.ln(), 15.0, 1.0).unwrap();
        let alloc = alloc_exponential(&p);
        let t1 = se_trajectory(&alloc, &p, SeMode::Hard { a: 1.0 }, 1, 8, 0);
        let t08 = se_trajectory(&alloc, &p, SeMode::Hard { a: 0.8 }, 1, 8, 0);
        let t0 = se_trajectory(&alloc, &p, SeMode::Hard { a: 0.0 }, 1, 8, 0);
        for t in 1..4 {
            assert!(t0.x[t] >= t08.x[t] && t08.x[t] >= t1.x[t], "ordering broken at {t}");
        }
    }

    #[test]
    fn asymptotic_exponential_t_star() {
        // snr = 15: C = 0.5 ln 16 = 1.3863 nats; R = 0.7C gives T* = 8.
        let c = 0.5 * 16f64.ln();
        let (xi, t_star) = se_asymptotic_exponential(0.7 * c, 15.0).unwrap();
        assert_eq!(t_star, 8);
        // Direct recursion agrees: first index hitting 1 is T*.
        let first_one = xi.iter().position(|&v| v >= 1.0).unwrap();
        assert_eq!(first_one, t_star);
        // Strictly increasing until clamped.
        for w in xi.windows(2) {
            assert!(w[1] > w[0] || w[1] == 1.0);
        }
    }

    #[test]
    fn asymptotic_exponential_r_equals_c_over_e() {
        // ln(C/R) = 1: per-step increment 1/(2C) and T* = ceil(2C).
        let c = 0.5 * 16f64.ln();
        let (xi, t_star) = se_asymptotic_exponential(c / core::f64::consts::E, 15.0).unwrap();
        assert_eq!(t_star, (2.0 * c).ceil() as usize);
        assert!((xi[1] - 1.0 / (2.0 * c)).abs() < 1e-12);
    }

    #[test]
    fn asymptotic_rejects_rates_at_or_above_capacity() {
        let c = 0.5 * 16f64.ln();
        assert!(se_asymptotic_exponential(c, 15.0).is_err());
        assert!(se_asymptotic_exponential(c * 1.1, 15.0).is_err());
    }

    #[test]
    fn decodable_fraction_extremes_and_scan() {
        let p = SparcParams::new(32, 8, 0.5, 4.0, 1.0).unwrap();
        let alloc = alloc_exponential(&p);
        assert_eq!(se_decodable_fraction(&alloc, 1e-12, 1.0), 1.0);
        assert_eq!(se_decodable_fraction(&alloc, 1e12, 1.0), 0.0);
        // Cross-check against a direct scan at tau_0^2.
        let tau0 = p.noise_var + p.power;
        let got = se_decodable_fraction(&alloc, p.rate_nats, tau0);
        let l = alloc.len() as f64;
        let direct: f64 = alloc
            .values()
            .iter()
            .filter(|&&pl| l * pl > 2.0 * p.rate_nats * tau0)
            .map(|&pl| pl / alloc.total())
            .sum();
        assert!((got - direct).abs() < 1e-15);
    }

    #[test]
    fn predicted_ser_limits() {
        // Zero power and M = 2: 1 - E[Phi(U)] = 1/2 by symmetry.
        let p = SparcParams::with_exact_rate(8, 4, 2, 1.0, 1.0).unwrap();
        let zeros = PowerAllocation::from_values(alloc::vec![0.0; 4]);
        let (ser, se) = se_predicted_ser(&zeros, &p, 20_000, 1);
        assert!((ser - 0.5).abs() < 5.0 * se + 1e-3, "ser = {ser}, se = {se}");

        // Enormous power: prediction collapses to 0.
        let huge = PowerAllocation::from_values(alloc::vec![1e9; 4]);
        let (ser, _) = se_predicted_ser(&huge, &p, 500, 1);
        assert!(ser < 1e-12);
    }

    #[test]
    fn predicted_ser_decreases_as_m_doubles() {
        // R = 1.5 bits, L = 1024, iterative allocation: doubling the section
        // size lowers the SE-predicted section error rate.
        let rate = 1.5 * core::f64::consts::LN_2;
        let mut previous = f64::INFINITY;
        for m in [256usize, 512, 1024] {
            let p = SparcParams::new(1024, m, rate, 15.0, 1.0).unwrap();
            let alloc = crate::power::alloc_iterative(&p, p.l, p.rate_nats).unwrap();
            let (ser, se) = se_predicted_ser(&alloc, &p, 4000, 9);
            assert!(
                ser < previous - se,
                "prediction did not decrease at M = {m}: {ser} vs {previous}"
            );
            previous = ser;
        }
    }

    #[test]
    fn sent_weight_edge_cases() {
        let mut rng = crate::rng::stream_rng(0, 0);
        assert_eq!(sent_weight_mc(0.0, 16, 10, &mut rng), 1.0 / 16.0);
        assert_eq!(sent_weight_mc(100.0, 16, 10, &mut rng), 1.0);
        let w = sent_weight_mc(2.0, 16, 2000, &mut rng);
        assert!(w > 0.05 && w < 0.95, "w = {w}");
    }

    #[test]
    fn soft_mode_reproducible_across_sample_counts() {
        let p = SparcParams::new(64, 16, 0.5, 8.0, 1.0).unwrap();
        let alloc = alloc_exponential(&p);
        let a = se_trajectory(&alloc, &p, SeMode::Soft, 400, 6, 11);
        let b = se_trajectory(&alloc, &p, SeMode::Soft, 400, 6, 12);
        // Different seeds, same estimand: agree to a few standard errors.
        for (x1, x2) in a.x.iter().zip(&b.x) {
            assert!((x1 - x2).abs() < 0.08, "{x1} vs {x2}");
        }
    }
}
