//! Successive-cancellation lossy compression.
//!
//! The encoder walks the `L` sections in order, greedily picking one column
//! per section against a shrinking residual. The non-zero coefficient of
//! section `l` is fixed a priori to
//!
//! ```text
//! c_l = sqrt(2 ln(M) sigma^2 (1 - 2R/L)^{l-1})
//! ```
//!
//! which drives the residual variance down by the factor `(1 - 2R/L)` per
//! section, reaching approximately `sigma^2 e^{-2R}` — the Gaussian
//! distortion-rate function — after all `L` steps.

use crate::design::Operator;
use crate::error::{Error, Result};
use crate::message::MessageVector;
use crate::params::SparcParams;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

/// How the encoder picks a column within each section.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectionRule {
    /// Maximize `<sqrt(n) A_j, r/||r||>`.
    Correlation,
    /// Minimize `||r - c_l A_j||^2`. Coincides with the correlation rule
    /// whenever all column norms are equal (exact for Hadamard designs).
    MinDistance,
}

/// Compression code parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct CompressParams {
    /// Code geometry; `noise_var` holds the source variance `sigma^2`.
    pub params: SparcParams,
    /// Section-size exponent: `M` was chosen as `L^b` (possibly rounded).
    pub b: f64,
    pub selection_rule: SelectionRule,
}

impl CompressParams {
    /// Builds compression parameters with `M = L^b`. When `round_m_pow2` is
    /// set (required for Hadamard designs), `M` is rounded to the nearest
    /// power of two in log scale. The block length follows from
    /// `n = ceil(L ln M / R)`; requires `2R/L < 1`.
    pub fn new(
        l: usize,
        b: f64,
        rate_nats: f64,
        source_var: f64,
        round_m_pow2: bool,
        selection_rule: SelectionRule,
    ) -> Result<Self> {
        if b <= 0.0 {
            return Err(Error::InvalidInput(format!("need b > 0, got {b}")));
        }
        let m_raw = (l as f64).powf(b);
        let m = if round_m_pow2 {
            1usize << (m_raw.log2().round() as u32)
        } else {
            m_raw.round() as usize
        };
        let params = SparcParams::new(l, m, rate_nats, source_var, source_var)?;
        Self::from_params(params, b, selection_rule)
    }

    /// Wraps explicit geometry (e.g. a pinned block length).
    pub fn from_params(params: SparcParams, b: f64, selection_rule: SelectionRule) -> Result<Self> {
        if 2.0 * params.rate_nats / params.l as f64 >= 1.0 {
            return Err(Error::InvalidInput(format!(
                "coefficient schedule needs 2R/L < 1, got R = {} nats, L = {}",
                params.rate_nats, params.l
            )));
        }
        Ok(CompressParams { params, b, selection_rule })
    }

    /// Source variance.
    pub fn source_var(&self) -> f64 {
        self.params.noise_var
    }

    /// The per-section coefficients `c_l`, `l = 1..L`.
    pub fn coefficient_schedule(&self) -> Vec<f64> {
        let l = self.params.l as f64;
        let r = self.params.rate_nats;
        let base = 2.0 * (self.params.m as f64).ln() * self.source_var();
        let ratio = 1.0 - 2.0 * r / l;
        (0..self.params.l).map(|i| (base * ratio.powi(i as i32)).sqrt()).collect()
    }
}

/// Encodes a source sequence: `L` sequential column selections with residual
/// update `r_l = r_{l-1} - c_l A_{m_l}`.
pub fn sc_encode(op: &impl Operator, source: &[f64], cp: &CompressParams) -> Result<MessageVector> {
    let (n, l, m) = (op.n(), op.sections(), op.m());
    if source.len() != n {
        return Err(Error::InvalidInput(format!("source has length {}, expected {n}", source.len())));
    }
    if l != cp.params.l || m != cp.params.m {
        return Err(Error::InvalidInput(format!(
            "operator geometry ({l}, {m}) differs from parameters ({}, {})",
            cp.params.l, cp.params.m
        )));
    }
    let coeffs = cp.coefficient_schedule();
    let mut residual = source.to_vec();
    let mut column = vec![0.0f64; n];
    let mut sections = Vec::with_capacity(l);
    for sec in 0..l {
        let scores = op.adjoint_section(sec, &residual);
        let c = coeffs[sec];
        let pick = match cp.selection_rule {
            SelectionRule::Correlation => argmax(&scores),
            SelectionRule::MinDistance => {
                // ||r - c A_j||^2 = ||r||^2 - 2 c <A_j, r> + c^2 ||A_j||^2.
                let mut best = 0;
                let mut best_val = f64::INFINITY;
                for (j, &s) in scores.iter().enumerate() {
                    let val = c * c * op.column_norm_sq(sec, j) - 2.0 * c * s;
                    if val < best_val {
                        best_val = val;
                        best = j;
                    }
                }
                best
            }
        };
        sections.push(pick);
        op.column_into(sec, pick, &mut column);
        for (r, &a) in residual.iter_mut().zip(&column) {
            *r -= c * a;
        }
    }
    MessageVector::new(sections, m)
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (j, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = j;
        }
    }
    best
}

/// Reconstruction `A beta` under the compression coefficient schedule.
pub fn reconstruct(op: &impl Operator, msg: &MessageVector, cp: &CompressParams) -> Result<Vec<f64>> {
    op.encode(msg, &cp.coefficient_schedule())
}

/// Mean squared error per sample.
pub fn distortion(source: &[f64], reconstruction: &[f64]) -> f64 {
    source
        .iter()
        .zip(reconstruction)
        .map(|(&s, &r)| (s - r) * (s - r))
        .sum::<f64>()
        / source.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::{DesignKind, DesignOperator};
    use crate::rng::stream_rng;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian_source(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = stream_rng(seed, 900);
        StandardNormal.sample_iter(&mut rng).take(n).collect()
    }

    #[test]
    fn first_coefficient_value() {
        // sigma^2 = 1, M = 4: c_1 = sqrt(2 ln 4) = 1.6651.
        let params = SparcParams::new(8, 4, 0.4, 1.0, 1.0).unwrap();
        let cp = CompressParams::from_params(params, 1.0, SelectionRule::Correlation).unwrap();
        let c = cp.coefficient_schedule();
        assert!((c[0] - (2.0 * 4f64.ln()).sqrt()).abs() < 1e-12);
        assert!((c[0] - 1.6651).abs() < 1e-4);
    }

    #[test]
    fn schedule_is_geometric() {
        let params = SparcParams::new(16, 8, 0.7, 1.0, 2.5).unwrap();
        let cp = CompressParams::from_params(params, 1.0, SelectionRule::Correlation).unwrap();
        let c = cp.coefficient_schedule();
        let ratio = 1.0 - 2.0 * cp.params.rate_nats / 16.0;
        for w in c.windows(2) {
            assert!((w[1] * w[1] / (w[0] * w[0]) - ratio).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_too_high_rate_per_section() {
        // 2R/L >= 1 leaves the schedule undefined.
        let params = SparcParams::new(2, 4, 1.2, 1.0, 1.0).unwrap();
        assert!(CompressParams::from_params(params, 1.0, SelectionRule::Correlation).is_err());
    }

    #[test]
    fn zero_source_completes_and_distortion_is_consistent() {
        let params = SparcParams::new(32, 8, 0.4, 1.0, 1.0).unwrap();
        let cp = CompressParams::from_params(params, 1.0, SelectionRule::MinDistance).unwrap();
        let op = DesignOperator::build(DesignKind::Hadamard, &cp.params, 5).unwrap();
        let source = vec![0.0; cp.params.n];
        let msg = sc_encode(&op, &source, &cp).unwrap();
        let rec = reconstruct(&op, &msg, &cp).unwrap();
        let d = distortion(&source, &rec);
        assert!(d >= 0.0);
        let norm: f64 = rec.iter().map(|&v| v * v).sum::<f64>() / cp.params.n as f64;
        assert!((d - norm).abs() < 1e-12);
    }

    #[test]
    fn residual_telescopes() {
        // The iteratively maintained residual equals s - sum_l c_l A_{m_l}.
        let params = SparcParams::new(64, 16, 0.6, 1.0, 1.0).unwrap();
        let cp = CompressParams::from_params(params, 2.0, SelectionRule::MinDistance).unwrap();
        let op = DesignOperator::build(DesignKind::Hadamard, &cp.params, 8).unwrap();
        let source = gaussian_source(cp.params.n, 8);
        let msg = sc_encode(&op, &source, &cp).unwrap();
        let rec = reconstruct(&op, &msg, &cp).unwrap();
        // distortion(s, rec) must equal |r_L|^2/n from a fresh residual pass.
        let mut residual = source.clone();
        let coeffs = cp.coefficient_schedule();
        let mut col = vec![0.0; cp.params.n];
        for (sec, &j) in msg.sections().iter().enumerate() {
            op.column_into(sec, j, &mut col);
            for (r, &a) in residual.iter_mut().zip(&col) {
                *r -= coeffs[sec] * a;
            }
        }
        let from_residual: f64 =
            residual.iter().map(|&v| v * v).sum::<f64>() / cp.params.n as f64;
        let direct = distortion(&source, &rec);
        assert!((from_residual - direct).abs() < 1e-9);
    }

    #[test]
    fn rules_agree_on_equal_norm_columns() {
        let params = SparcParams::new(12, 16, 0.5, 1.0, 1.0).unwrap();
        let corr = CompressParams::from_params(params, 1.0, SelectionRule::Correlation).unwrap();
        let mind = CompressParams::from_params(params, 1.0, SelectionRule::MinDistance).unwrap();
        let op = DesignOperator::build(DesignKind::Hadamard, &params, 13).unwrap();
        for seed in 0..5 {
            let source = gaussian_source(params.n, seed);
            let a = sc_encode(&op, &source, &corr).unwrap();
            let b = sc_encode(&op, &source, &mind).unwrap();
            assert_eq!(a, b, "seed {seed}");
        }
    }

    #[test]
    fn distortion_beats_trivial_and_bounded_below() {
        // Compressing a unit-variance source at a moderate rate should land
        // between the rate-distortion bound and the source variance.
        let cp = CompressParams::new(
            32,
            2.0,
            0.8 * core::f64::consts::LN_2,
            1.0,
            true,
            SelectionRule::MinDistance,
        )
        .unwrap();
        let op = DesignOperator::build(DesignKind::Hadamard, &cp.params, 77).unwrap();
        let mut mean = 0.0;
        let trials = 10;
        for seed in 0..trials {
            let source = gaussian_source(cp.params.n, 100 + seed);
            let msg = sc_encode(&op, &source, &cp).unwrap();
            let rec = reconstruct(&op, &msg, &cp).unwrap();
            mean += distortion(&source, &rec);
        }
        mean /= trials as f64;
        let dstar = (-2.0 * cp.params.rate_nats).exp();
        assert!(mean > dstar, "distortion {mean} below the optimum {dstar}");
        assert!(mean < 1.0, "no compression gain: {mean}");
    }
}
