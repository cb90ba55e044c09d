//! Design operators: the `n x ML` matrix `A` in its three flavors.
//!
//! Gaussian and Bernoulli designs materialize their entries (desk scale).
//! The Hadamard design stores only per-section row permutations of a
//! Hadamard matrix `H_k` and applies itself with a fast Walsh–Hadamard
//! transform, so memory is `O(nL)` and one application costs
//! `O(L 2^k k)` instead of `O(nML)`.
//!
//! All three kinds share the same contract: column entries have variance
//! `1/n`, so Hadamard signs are scaled by `1/sqrt(n)` at application time.

use crate::error::{Error, Result};
use crate::message::MessageVector;
use crate::params::SparcParams;
use crate::power::PowerAllocation;
use crate::rng::stream_rng2;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;
use rand_distr::StandardNormal;

/// In-place unnormalized Walsh–Hadamard transform: `x <- H_k x` with
/// `H_k = [[H_{k-1}, H_{k-1}], [H_{k-1}, -H_{k-1}]]`, `H_0 = 1`.
pub fn fwht(x: &mut [f64]) -> Result<()> {
    let n = x.len();
    if n == 0 || !n.is_power_of_two() {
        return Err(Error::InvalidInput(format!("FWHT length {n} is not a power of two")));
    }
    let mut h = 1;
    while h < n {
        fwht_stage(x, h, n);
        h *= 2;
    }
    Ok(())
}

#[inline]
fn fwht_stage(x: &mut [f64], h: usize, limit: usize) {
    let mut i = 0;
    while i < limit {
        for j in i..i + h {
            let a = x[j];
            let b = x[j + h];
            x[j] = a + b;
            x[j + h] = a - b;
        }
        i += 2 * h;
    }
}

/// FWHT of a buffer whose support lies in `[0, support)` (a power of two).
/// Stages small enough to stay inside the support skip the all-zero blocks;
/// the result is bit-identical to the plain transform.
fn fwht_sparse_input(x: &mut [f64], support: usize) {
    let n = x.len();
    let mut h = 1;
    while h < n {
        let limit = if 2 * h <= support { support } else { n };
        fwht_stage(x, h, limit);
        h *= 2;
    }
}

/// FWHT evaluated only on the leading `keep` outputs (a power of two).
/// Stages commute, so the large strides run first over the whole buffer and
/// the small ones touch only the block containing the kept outputs. Entries
/// at `keep` and beyond are left in an intermediate state.
fn fwht_prefix_output(x: &mut [f64], keep: usize) {
    let n = x.len();
    let keep = keep.min(n);
    let mut h = n / 2;
    while h >= keep.max(1) {
        fwht_stage(x, h, n);
        h /= 2;
    }
    let mut h2 = 1;
    while h2 < keep {
        fwht_stage(x, h2, keep);
        h2 *= 2;
    }
}

/// The three design-matrix ensembles.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DesignKind {
    /// i.i.d. `N(0, 1/n)` entries.
    Gaussian,
    /// i.i.d. `+-1/sqrt(n)` entries.
    Bernoulli,
    /// Per-section random rows of a Hadamard matrix, applied via FWHT.
    Hadamard,
}

enum Storage {
    /// Per-section column-major entries: index `(sec * m + col) * n + row`.
    Dense(Vec<f64>),
    /// Per-section row indices into `H_k`: index `sec * n + i`; row 0 and
    /// column 0 of `H_k` are never used.
    Hadamard { k: u32, rows: Vec<u32> },
}

/// An immutable design operator for a fixed `(n, L, M, seed)`.
pub struct DesignOperator {
    kind: DesignKind,
    n: usize,
    l: usize,
    m: usize,
    seed: u64,
    storage: Storage,
}

/// Anything that behaves like a sectioned design matrix: full operators and
/// the prefix / sub-section views derived from them.
pub trait Operator {
    /// Number of rows (block length).
    fn n(&self) -> usize;
    /// Number of sections.
    fn sections(&self) -> usize;
    /// Columns per section.
    fn m(&self) -> usize;
    /// Sparse application: `sum_l coeffs[l] * A_{column(l)}`.
    fn encode(&self, msg: &MessageVector, coeffs: &[f64]) -> Result<Vec<f64>>;
    /// Dense application `A beta`; `beta` has length `sections * m`.
    fn forward_dense(&self, beta: &[f64]) -> Vec<f64>;
    /// Transpose application `A^T v`, length `sections * m`.
    fn adjoint(&self, v: &[f64]) -> Vec<f64>;
    /// Transpose application restricted to one section, length `m`.
    fn adjoint_section(&self, section: usize, v: &[f64]) -> Vec<f64> {
        let mut col = vec![0.0f64; self.n()];
        (0..self.m())
            .map(|j| {
                self.column_into(section, j, &mut col);
                col.iter().zip(v).map(|(&a, &b)| a * b).sum()
            })
            .collect()
    }
    /// Squared Euclidean norm of one column.
    fn column_norm_sq(&self, section: usize, col: usize) -> f64 {
        let mut buf = vec![0.0f64; self.n()];
        self.column_into(section, col, &mut buf);
        buf.iter().map(|&a| a * a).sum()
    }
    /// Materializes one column.
    fn column_into(&self, section: usize, col: usize, out: &mut [f64]);
}

impl DesignOperator {
    /// Builds a design operator. Deterministic in `(kind, params, seed)`;
    /// each section draws from its own seeded stream, so a section's columns
    /// depend only on `(seed, section index)` and not on `L`.
    pub fn build(kind: DesignKind, params: &SparcParams, seed: u64) -> Result<Self> {
        let (n, l, m) = (params.n, params.l, params.m);
        let storage = match kind {
            DesignKind::Gaussian | DesignKind::Bernoulli => {
                let scale = 1.0 / (n as f64).sqrt();
                let mut entries = vec![0.0f64; n * l * m];
                for sec in 0..l {
                    let mut rng = stream_rng2(seed, DOMAIN_SECTION, sec as u64);
                    let block = &mut entries[sec * m * n..(sec + 1) * m * n];
                    match kind {
                        DesignKind::Gaussian => {
                            for e in block.iter_mut() {
                                let z: f64 = rng.sample(StandardNormal);
                                *e = z * scale;
                            }
                        }
                        DesignKind::Bernoulli => {
                            for e in block.iter_mut() {
                                *e = if rng.random::<bool>() { scale } else { -scale };
                            }
                        }
                        DesignKind::Hadamard => unreachable!(),
                    }
                }
                Storage::Dense(entries)
            }
            DesignKind::Hadamard => {
                if !m.is_power_of_two() {
                    return Err(Error::Config(format!(
                        "Hadamard design needs M to be a power of two, got {m}"
                    )));
                }
                let k = needed_order(n, m);
                let size = 1usize << k;
                let mut rows = Vec::with_capacity(l * n);
                for sec in 0..l {
                    let mut rng = stream_rng2(seed, DOMAIN_SECTION, sec as u64);
                    // Partial Fisher-Yates over rows 1..2^k (row 0 is all-ones).
                    let mut pool: Vec<u32> = (1..size as u32).collect();
                    for i in 0..n {
                        let j = rng.random_range(i..pool.len());
                        pool.swap(i, j);
                    }
                    rows.extend_from_slice(&pool[..n]);
                }
                Storage::Hadamard { k, rows }
            }
        };
        Ok(DesignOperator { kind, n, l, m, seed, storage })
    }

    pub fn kind(&self) -> DesignKind {
        self.kind
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Hadamard row indices of one section (Hadamard kind only).
    pub fn hadamard_rows(&self, section: usize) -> Option<&[u32]> {
        match &self.storage {
            Storage::Hadamard { rows, .. } => Some(&rows[section * self.n..(section + 1) * self.n]),
            Storage::Dense(_) => None,
        }
    }

    /// Codeword for a message under a power allocation:
    /// `sum_l sqrt(n P_l) A_{column(l)}`.
    pub fn forward(&self, msg: &MessageVector, alloc: &PowerAllocation) -> Result<Vec<f64>> {
        if alloc.len() != self.l {
            return Err(Error::InvalidInput(format!(
                "allocation has {} sections, operator has {}",
                alloc.len(),
                self.l
            )));
        }
        self.encode(msg, &alloc.coefficients(self.n))
    }

    fn fwht_size(&self) -> usize {
        match &self.storage {
            Storage::Hadamard { k, .. } => 1usize << *k,
            Storage::Dense(_) => 0,
        }
    }

    /// Dense application restricted to sections `0..sections`.
    fn forward_dense_prefix(&self, beta: &[f64], sections: usize) -> Vec<f64> {
        debug_assert_eq!(beta.len(), sections * self.m);
        let mut y = vec![0.0f64; self.n];
        match &self.storage {
            Storage::Dense(entries) => {
                for sec in 0..sections {
                    for col in 0..self.m {
                        let w = beta[sec * self.m + col];
                        if w != 0.0 {
                            let base = (sec * self.m + col) * self.n;
                            let column = &entries[base..base + self.n];
                            for (yi, &a) in y.iter_mut().zip(column) {
                                *yi += w * a;
                            }
                        }
                    }
                }
            }
            Storage::Hadamard { rows, .. } => {
                let size = self.fwht_size();
                let support = (self.m + 1).next_power_of_two().min(size);
                let mut buf = vec![0.0f64; size];
                let scale = 1.0 / (self.n as f64).sqrt();
                for sec in 0..sections {
                    buf.fill(0.0);
                    // Zero-prepend: column j maps to Hadamard column j+1.
                    buf[1..=self.m].copy_from_slice(&beta[sec * self.m..(sec + 1) * self.m]);
                    fwht_sparse_input(&mut buf, support);
                    let sec_rows = &rows[sec * self.n..(sec + 1) * self.n];
                    for (yi, &r) in y.iter_mut().zip(sec_rows) {
                        *yi += buf[r as usize] * scale;
                    }
                }
            }
        }
        y
    }

    /// Adjoint restricted to sections `0..sections`.
    fn adjoint_prefix(&self, v: &[f64], sections: usize) -> Vec<f64> {
        debug_assert_eq!(v.len(), self.n);
        let mut out = vec![0.0f64; sections * self.m];
        match &self.storage {
            Storage::Dense(entries) => {
                for sec in 0..sections {
                    for col in 0..self.m {
                        let base = (sec * self.m + col) * self.n;
                        let column = &entries[base..base + self.n];
                        out[sec * self.m + col] =
                            column.iter().zip(v).map(|(&a, &vi)| a * vi).sum();
                    }
                }
            }
            Storage::Hadamard { rows, .. } => {
                let size = self.fwht_size();
                let keep = (self.m + 1).next_power_of_two().min(size);
                let mut buf = vec![0.0f64; size];
                let scale = 1.0 / (self.n as f64).sqrt();
                for sec in 0..sections {
                    buf.fill(0.0);
                    let sec_rows = &rows[sec * self.n..(sec + 1) * self.n];
                    for (&r, &vi) in sec_rows.iter().zip(v) {
                        buf[r as usize] = vi;
                    }
                    fwht_prefix_output(&mut buf, keep);
                    for col in 0..self.m {
                        out[sec * self.m + col] = buf[col + 1] * scale;
                    }
                }
            }
        }
        out
    }

    fn column_into_inner(&self, section: usize, col: usize, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.n);
        match &self.storage {
            Storage::Dense(entries) => {
                let base = (section * self.m + col) * self.n;
                out.copy_from_slice(&entries[base..base + self.n]);
            }
            Storage::Hadamard { rows, .. } => {
                let scale = 1.0 / (self.n as f64).sqrt();
                let c = (col + 1) as u32;
                let sec_rows = &rows[section * self.n..(section + 1) * self.n];
                for (o, &r) in out.iter_mut().zip(sec_rows) {
                    // H_k[r][c] = (-1)^popcount(r & c)
                    *o = if (r & c).count_ones() & 1 == 0 { scale } else { -scale };
                }
            }
        }
    }
}

/// Hadamard order for a code of block length `n` and section size `m`:
/// `k = ceil(log2(max(n+1, m+1)))`.
pub fn needed_order(n: usize, m: usize) -> u32 {
    let need = n.max(m) + 1;
    usize::BITS - (need - 1).leading_zeros()
}

impl Operator for DesignOperator {
    fn n(&self) -> usize {
        self.n
    }

    fn sections(&self) -> usize {
        self.l
    }

    fn m(&self) -> usize {
        self.m
    }

    fn encode(&self, msg: &MessageVector, coeffs: &[f64]) -> Result<Vec<f64>> {
        if msg.len() != self.l || coeffs.len() != self.l {
            return Err(Error::InvalidInput(format!(
                "message/coefficients have {}/{} sections, operator has {}",
                msg.len(),
                coeffs.len(),
                self.l
            )));
        }
        let mut y = vec![0.0f64; self.n];
        let mut column = vec![0.0f64; self.n];
        for (sec, (&col, &c)) in msg.sections().iter().zip(coeffs).enumerate() {
            if c == 0.0 {
                continue;
            }
            self.column_into_inner(sec, col, &mut column);
            for (yi, &a) in y.iter_mut().zip(&column) {
                *yi += c * a;
            }
        }
        Ok(y)
    }

    fn forward_dense(&self, beta: &[f64]) -> Vec<f64> {
        self.forward_dense_prefix(beta, self.l)
    }

    fn adjoint(&self, v: &[f64]) -> Vec<f64> {
        self.adjoint_prefix(v, self.l)
    }

    fn adjoint_section(&self, section: usize, v: &[f64]) -> Vec<f64> {
        match &self.storage {
            Storage::Dense(entries) => (0..self.m)
                .map(|col| {
                    let base = (section * self.m + col) * self.n;
                    entries[base..base + self.n].iter().zip(v).map(|(&a, &b)| a * b).sum()
                })
                .collect(),
            Storage::Hadamard { rows, .. } => {
                let size = self.fwht_size();
                let keep = (self.m + 1).next_power_of_two().min(size);
                let mut buf = vec![0.0f64; size];
                let scale = 1.0 / (self.n as f64).sqrt();
                let sec_rows = &rows[section * self.n..(section + 1) * self.n];
                for (&r, &vi) in sec_rows.iter().zip(v) {
                    buf[r as usize] = vi;
                }
                fwht_prefix_output(&mut buf, keep);
                (0..self.m).map(|col| buf[col + 1] * scale).collect()
            }
        }
    }

    fn column_norm_sq(&self, section: usize, col: usize) -> f64 {
        match &self.storage {
            Storage::Dense(entries) => {
                let base = (section * self.m + col) * self.n;
                entries[base..base + self.n].iter().map(|&a| a * a).sum()
            }
            // Hadamard columns are n signs scaled by 1/sqrt(n).
            Storage::Hadamard { .. } => 1.0,
        }
    }

    fn column_into(&self, section: usize, col: usize, out: &mut [f64]) {
        self.column_into_inner(section, col, out)
    }
}

/// A view of the first `sections` sections of an operator.
///
/// Used by the broadcast receiver that only knows the leading design-matrix
/// blocks, and by the unprotected-prefix re-run after outer-code decoding.
pub struct PrefixOperator<'a> {
    inner: &'a DesignOperator,
    sections: usize,
}

impl<'a> PrefixOperator<'a> {
    pub fn new(inner: &'a DesignOperator, sections: usize) -> Result<Self> {
        if sections > inner.sections() {
            return Err(Error::InvalidInput(format!(
                "prefix of {sections} sections exceeds operator's {}",
                inner.sections()
            )));
        }
        Ok(PrefixOperator { inner, sections })
    }
}

impl Operator for PrefixOperator<'_> {
    fn n(&self) -> usize {
        self.inner.n()
    }

    fn sections(&self) -> usize {
        self.sections
    }

    fn m(&self) -> usize {
        self.inner.m()
    }

    fn encode(&self, msg: &MessageVector, coeffs: &[f64]) -> Result<Vec<f64>> {
        if msg.len() != self.sections || coeffs.len() != self.sections {
            return Err(Error::InvalidInput(format!(
                "message/coefficients have {}/{} sections, view has {}",
                msg.len(),
                coeffs.len(),
                self.sections
            )));
        }
        let mut y = vec![0.0f64; self.inner.n()];
        let mut column = vec![0.0f64; self.inner.n()];
        for (sec, (&col, &c)) in msg.sections().iter().zip(coeffs).enumerate() {
            if c == 0.0 {
                continue;
            }
            self.inner.column_into_inner(sec, col, &mut column);
            for (yi, &a) in y.iter_mut().zip(&column) {
                *yi += c * a;
            }
        }
        Ok(y)
    }

    fn forward_dense(&self, beta: &[f64]) -> Vec<f64> {
        self.inner.forward_dense_prefix(beta, self.sections)
    }

    fn adjoint(&self, v: &[f64]) -> Vec<f64> {
        self.inner.adjoint_prefix(v, self.sections)
    }

    fn adjoint_section(&self, section: usize, v: &[f64]) -> Vec<f64> {
        debug_assert!(section < self.sections);
        self.inner.adjoint_section(section, v)
    }

    fn column_norm_sq(&self, section: usize, col: usize) -> f64 {
        debug_assert!(section < self.sections);
        self.inner.column_norm_sq(section, col)
    }

    fn column_into(&self, section: usize, col: usize, out: &mut [f64]) {
        debug_assert!(section < self.sections);
        self.inner.column_into_inner(section, col, out)
    }
}

const DOMAIN_SECTION: u64 = 0x5EC7;
