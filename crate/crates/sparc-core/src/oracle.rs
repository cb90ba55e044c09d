//! Exhaustive least-squares search over the codebook.
//!
//! Ground truth for decoder tests and the engine behind the toy Wyner-Ziv /
//! Gelfand-Pinsker pipelines: `argmin_beta ||target - A beta||^2` over all
//! `M^L` candidates. The same rule serves minimum-distance encoding for
//! compression.

use crate::design::Operator;
use crate::error::{Error, Result};
use crate::message::MessageVector;
use crate::power::PowerAllocation;
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

/// Cap on the number of codewords an exhaustive search may visit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchBudget {
    pub max_codewords: u128,
}

impl Default for SearchBudget {
    fn default() -> Self {
        SearchBudget { max_codewords: 1 << 20 }
    }
}

/// Exhaustive nearest-codeword search; enumerates section-index tuples in
/// lexicographic order and returns the first global minimizer.
///
/// The residual is updated incrementally (one column subtraction per visited
/// node), so each enumeration step costs `O(n)`.
pub fn exhaustive_nearest(
    op: &impl Operator,
    target: &[f64],
    alloc: &PowerAllocation,
    budget: &SearchBudget,
) -> Result<MessageVector> {
    let (n, l, m) = (op.n(), op.sections(), op.m());
    if target.len() != n {
        return Err(Error::InvalidInput(alloc::format!(
            "target has length {}, expected {n}",
            target.len()
        )));
    }
    if alloc.len() != l {
        return Err(Error::InvalidInput(alloc::format!(
            "allocation has {} sections, operator has {l}",
            alloc.len()
        )));
    }
    let needed = (m as u128).checked_pow(l as u32).ok_or(Error::BudgetExceeded {
        needed: u128::MAX,
        budget: budget.max_codewords,
    })?;
    if needed > budget.max_codewords {
        return Err(Error::BudgetExceeded { needed, budget: budget.max_codewords });
    }

    let coeffs = alloc.coefficients(n);
    let mut residual = target.to_vec();
    let mut columns: Vec<Vec<f64>> = vec![vec![0.0; n]; l];
    let mut current = vec![0usize; l];
    let mut best: Option<(f64, Vec<usize>)> = None;

    search(op, &coeffs, &mut residual, &mut columns, &mut current, 0, &mut best);

    let (_, sections) = best.expect("at least one candidate visited");
    MessageVector::new(sections, m)
}

fn search(
    op: &impl Operator,
    coeffs: &[f64],
    residual: &mut [f64],
    columns: &mut [Vec<f64>],
    current: &mut [usize],
    depth: usize,
    best: &mut Option<(f64, Vec<usize>)>,
) {
    let l = coeffs.len();
    if depth == l {
        let dist: f64 = residual.iter().map(|&v| v * v).sum();
        // Strict comparison keeps the lexicographically first minimizer.
        if best.as_ref().map_or(true, |(d, _)| dist < *d) {
            *best = Some((dist, current.to_vec()));
        }
        return;
    }
    let m = op.m();
    let c = coeffs[depth];
    let (col_store, rest) = columns.split_at_mut(1);
    let col = &mut col_store[0];
    for j in 0..m {
        op.column_into(depth, j, col);
        for (r, &a) in residual.iter_mut().zip(col.iter()) {
            *r -= c * a;
        }
        current[depth] = j;
        search(op, coeffs, residual, rest, current, depth + 1, best);
        op.column_into(depth, j, col);
        for (r, &a) in residual.iter_mut().zip(col.iter()) {
            *r += c * a;
        }
    }
}
