//! Per-section power allocations.
//!
//! All schemes return non-negative, non-increasing values summing to the
//! power budget `P`. Exponentials are evaluated in nats throughout; the
//! base-2 form `2^{-2aC l/L}` (capacity in bits) equals `e^{-2aC l/L}` with
//! capacity in nats, so the two conventions coincide.

use crate::error::{Error, Result};
use crate::params::SparcParams;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

/// Non-negative per-section powers summing to `P`.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerAllocation {
    values: Vec<f64>,
}

impl PowerAllocation {
    /// Wraps raw values; callers are responsible for the sum constraint.
    pub fn from_values(values: Vec<f64>) -> Self {
        PowerAllocation { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Non-zero coefficient of section `l`: `sqrt(n * P_l)`.
    pub fn coefficient(&self, l: usize, n: usize) -> f64 {
        (n as f64 * self.values[l]).sqrt()
    }

    /// All `L` coefficients `sqrt(n * P_l)`.
    pub fn coefficients(&self, n: usize) -> Vec<f64> {
        self.values.iter().map(|&p| (n as f64 * p).sqrt()).collect()
    }

    /// Length of the maximal constant suffix (the "flat" region).
    pub fn flat_suffix_len(&self) -> usize {
        let l = self.values.len();
        if l == 0 {
            return 0;
        }
        let last = self.values[l - 1];
        let tol = 1e-12 * self.values[0].max(last).max(1e-300);
        let mut k = 1;
        while k < l && (self.values[l - 1 - k] - last).abs() <= tol {
            k += 1;
        }
        k
    }
}

/// Equal power `P/L` in every section.
pub fn alloc_flat(params: &SparcParams) -> PowerAllocation {
    PowerAllocation { values: vec![params.power / params.l as f64; params.l] }
}

/// Exponentially decaying allocation
/// `P_l = P (e^{2C/L} - 1) / (1 - e^{-2C}) e^{-2C l/L}` for `l = 1..L`.
pub fn alloc_exponential(params: &SparcParams) -> PowerAllocation {
    let c = params.capacity_nats();
    let l = params.l as f64;
    let scale = params.power * ((2.0 * c / l).exp() - 1.0) / (1.0 - (-2.0 * c).exp());
    let values = (1..=params.l).map(|i| scale * (-2.0 * c * i as f64 / l).exp()).collect();
    PowerAllocation { values }
}

/// Modified exponential allocation: geometric with exponent `a` up to section
/// `floor(f L)`, then constant (continuous at the junction); normalized to `P`.
pub fn alloc_modified(params: &SparcParams, a: f64, f: f64) -> Result<PowerAllocation> {
    if a < 0.0 || !(0.0..=1.0).contains(&f) {
        return Err(Error::InvalidInput(format!("need a >= 0 and f in [0,1], got a={a}, f={f}")));
    }
    let c = params.capacity_nats();
    let l = params.l as f64;
    let cut = (f * l).floor() as usize;
    // Geometric up to section `cut`, then held at the junction value.
    let mut values: Vec<f64> = (1..=params.l)
        .map(|i| (-2.0 * a * c * i.min(cut) as f64 / l).exp())
        .collect();
    let sum: f64 = values.iter().sum();
    let kappa = params.power / sum;
    for v in &mut values {
        *v *= kappa;
    }
    Ok(PowerAllocation { values })
}

/// Iterative block power allocation.
///
/// Sections are grouped into `B` blocks of `L/B`. Each block in turn receives
/// the minimum power that lets it decode at the working rate (`2 R_PA tau^2 /
/// L` per section, with `tau^2` the noise-plus-undecoded power); as soon as
/// an equal split of the remaining power over the remaining sections exceeds
/// that minimum, the allocation flattens and stops.
pub fn alloc_iterative(params: &SparcParams, b: usize, r_pa: f64) -> Result<PowerAllocation> {
    let l = params.l;
    if b == 0 || l % b != 0 {
        return Err(Error::Config(format!("B = {b} must divide L = {l}")));
    }
    if r_pa < 0.0 || !r_pa.is_finite() {
        return Err(Error::InvalidInput(format!("R_PA must be non-negative, got {r_pa}")));
    }
    let k = l / b;
    let mut values = vec![0.0f64; l];
    let mut allocated = 0.0;
    let mut flattened = false;
    for blk in 0..b {
        let p_remain = params.power - allocated;
        let tau_sq = params.noise_var + p_remain;
        let p_block = 2.0 * r_pa * tau_sq / l as f64;
        let sections_left = l - blk * k;
        if p_remain / sections_left as f64 > p_block {
            let flat = p_remain / sections_left as f64;
            for v in &mut values[blk * k..] {
                *v = flat;
            }
            flattened = true;
            break;
        }
        for v in &mut values[blk * k..(blk + 1) * k] {
            *v = p_block;
        }
        allocated += p_block * k as f64;
    }
    if !flattened {
        return Err(Error::Infeasible(format!(
            "iterative allocation at R_PA = {r_pa} nats never flattens; \
             the per-block minimum exhausts the power budget"
        )));
    }
    Ok(PowerAllocation { values })
}

/// Outcome of one bracket trial in [`partition_mac`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BracketTrial {
    /// Which user the bracket belongs to (0 or 1).
    pub user: usize,
    /// First section of the bracket.
    pub start: usize,
    /// Power inside the bracket.
    pub bracket_power: f64,
    /// Power left for the other user.
    pub complement_power: f64,
    /// Fraction of the bracket owner's sections lying in the flat region.
    pub flat_ratio: f64,
}

/// Per-section user assignment for a two-user MAC.
#[derive(Debug, Clone, PartialEq)]
pub struct MacPartition {
    /// `assignment[l]` is 0 or 1: the user owning section `l`.
    pub assignment: Vec<usize>,
    /// The bracket trial that was chosen.
    pub chosen: BracketTrial,
}

impl MacPartition {
    /// Sections owned by `user`, in increasing order.
    pub fn sections_of(&self, user: usize) -> Vec<usize> {
        self.assignment
            .iter()
            .enumerate()
            .filter(|(_, &u)| u == user)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Splits a non-increasing allocation between two users.
///
/// Tries a contiguous bracket of `l1` sections for user 0 and one of `l2`
/// sections for user 1. Each trial slides its window to the position with
/// maximal power not exceeding the owner's budget (leftmost wins ties); the
/// trial whose flat-section split ratio is closest to the allocation's
/// overall flat ratio is kept, and the complement goes to the other user.
///
/// Contiguous windows quantize power in steps of one section, so the
/// complement may overshoot the other user's budget by up to one section's
/// power; anything beyond that is reported as infeasible.
pub fn partition_mac(
    alloc: &PowerAllocation,
    l1: usize,
    l2: usize,
    p1: f64,
    p2: f64,
) -> Result<MacPartition> {
    let l = alloc.len();
    if l1 + l2 != l {
        return Err(Error::InvalidInput(format!("L1 + L2 = {} but allocation has {l} sections", l1 + l2)));
    }
    let total = alloc.total();
    if (p1 + p2 - total).abs() > 1e-6 * total.max(1.0) {
        return Err(Error::InvalidInput(format!(
            "P1 + P2 = {} but allocation sums to {total}",
            p1 + p2
        )));
    }
    let flat_len = alloc.flat_suffix_len();
    let overall_flat_ratio = flat_len as f64 / l as f64;
    // Contiguous windows quantize power in steps of one section; near the
    // optimum the window boundary sits in the flat tail, so the smallest
    // nonzero section power is the achievable granularity.
    let quantum = alloc
        .values()
        .iter()
        .copied()
        .filter(|&v| v > 0.0)
        .fold(f64::INFINITY, f64::min)
        .min(alloc.values().iter().cloned().fold(0.0f64, f64::max));

    let trial = |user: usize, width: usize, budget: f64, other_budget: f64| -> Option<BracketTrial> {
        if width == 0 || width > l {
            return None;
        }
        // Prefix sums keep the window scan exact and O(L).
        let mut best: Option<(usize, f64)> = None;
        let mut window: f64 = alloc.values()[..width].iter().sum();
        for start in 0..=(l - width) {
            if start > 0 {
                window += alloc.values()[start + width - 1] - alloc.values()[start - 1];
            }
            if window <= budget * (1.0 + 1e-12) {
                let better = match best {
                    None => true,
                    Some((_, w)) => window > w * (1.0 + 1e-15),
                };
                if better {
                    best = Some((start, window));
                }
            }
        }
        let (start, bracket_power) = best?;
        let complement_power = total - bracket_power;
        if complement_power > other_budget + quantum * (1.0 + 1e-9) {
            return None;
        }
        let flat_start = l - flat_len;
        let flat_in_bracket = (start + width).saturating_sub(flat_start.max(start));
        Some(BracketTrial {
            user,
            start,
            bracket_power,
            complement_power,
            flat_ratio: flat_in_bracket as f64 / width as f64,
        })
    };

    let t1 = trial(0, l1, p1, p2);
    let t2 = trial(1, l2, p2, p1);
    let chosen = match (t1, t2) {
        (None, None) => {
            return Err(Error::Infeasible(format!(
                "no bracket of {l1} sections fits P1 = {p1} and no bracket of {l2} sections fits P2 = {p2}"
            )))
        }
        (Some(t), None) => t,
        (None, Some(t)) => t,
        (Some(a), Some(b)) => {
            let da = (a.flat_ratio - overall_flat_ratio).abs();
            let db = (b.flat_ratio - overall_flat_ratio).abs();
            if da <= db {
                a
            } else {
                b
            }
        }
    };

    let owner = chosen.user;
    let other = 1 - owner;
    let width = if owner == 0 { l1 } else { l2 };
    let mut assignment = vec![other; l];
    for a in &mut assignment[chosen.start..chosen.start + width] {
        *a = owner;
    }
    Ok(MacPartition { assignment, chosen })
}
