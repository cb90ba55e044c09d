//! Section posteriors to bit posteriors, and the outer-code hook.
//!
//! The AMP decoder's final estimate carries, within each section, weights
//! proportional to the posterior probability of each column. An outer code
//! (LDPC, Reed-Solomon, ...) consumes bit-wise posteriors instead; the
//! conversion walks the bit positions of the column index from most to
//! least significant (matching the big-endian message codec).

use sparc_core::amp::{rerun_unprotected, AmpConfig, AmpOutput};
use sparc_core::design::DesignOperator;
use sparc_core::{Error, MessageVector, PowerAllocation, SparcParams};

/// Converts one section's non-negative column weights into `log2(M)` bit
/// posteriors; `p[b]` is the probability that bit `b` (most significant
/// first) equals one.
pub fn bit_posteriors(weights: &[f64]) -> Result<Vec<f64>, Error> {
    let m = weights.len();
    if m < 2 || !m.is_power_of_two() {
        return Err(Error::InvalidInput(format!(
            "section size {m} is not a power of two"
        )));
    }
    if weights.iter().any(|&w| w < 0.0 || !w.is_finite()) {
        return Err(Error::InvalidInput("weights must be non-negative and finite".into()));
    }
    let c: f64 = weights.iter().sum();
    if c == 0.0 {
        return Err(Error::InvalidInput("all-zero section has undefined posteriors".into()));
    }
    let log_m = m.trailing_zeros() as usize;
    let mut p = vec![0.0f64; log_m];
    for log_i in 0..log_m {
        let i = 1usize << log_i;
        let b = log_m - log_i - 1;
        let mut k = i;
        while k < m {
            // 1-based positions k+1 ..= k+i.
            for j in k + 1..=k + i {
                p[b] += weights[j - 1] / c;
            }
            k += 2 * i;
        }
    }
    Ok(p)
}

/// Bit posteriors for the sections `protected_from..L` of an AMP estimate,
/// concatenated in section order.
pub fn protected_bit_posteriors(
    output: &AmpOutput,
    params: &SparcParams,
    protected_from: usize,
) -> Result<Vec<f64>, Error> {
    let m = params.m;
    let mut all = Vec::new();
    for sec in protected_from..params.l {
        all.extend(bit_posteriors(&output.beta[sec * m..(sec + 1) * m])?);
    }
    Ok(all)
}

/// Runs an external soft-decision decoder over the protected sections and,
/// on success, subtracts their codeword contribution and re-runs AMP on the
/// unprotected prefix. On failure the single-pass hardening stands.
///
/// The callback receives the protected sections' bit posteriors and returns
/// the decoded bits (`log2(M)` per protected section) or `None`.
pub fn outer_code_hook(
    op: &DesignOperator,
    y: &[f64],
    alloc: &PowerAllocation,
    params: &SparcParams,
    config: &AmpConfig,
    first_pass: &AmpOutput,
    protected_from: usize,
    decoder: impl FnOnce(&[f64]) -> Option<Vec<bool>>,
) -> Result<MessageVector, Error> {
    if protected_from > params.l {
        return Err(Error::InvalidInput(format!(
            "protected suffix starts at {protected_from} but the code has {} sections",
            params.l
        )));
    }
    let bits_per_section = params.bits_per_section()?;
    let posteriors = protected_bit_posteriors(first_pass, params, protected_from)?;
    let decoded = match decoder(&posteriors) {
        Some(bits) => bits,
        None => return Ok(first_pass.message.clone()),
    };
    if decoded.len() != posteriors.len() {
        return Err(Error::InvalidInput(format!(
            "outer decoder returned {} bits, expected {}",
            decoded.len(),
            posteriors.len()
        )));
    }
    let mut fixed: Vec<Option<usize>> = vec![None; params.l];
    for (sec_offset, chunk) in decoded.chunks(bits_per_section).enumerate() {
        let idx = chunk.iter().fold(0usize, |acc, &bit| (acc << 1) | bit as usize);
        fixed[protected_from + sec_offset] = Some(idx);
    }
    rerun_unprotected(op, y, &fixed, alloc, params, config)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_column_hand_trace() {
        // M = 2, beta = [0.3, 0.7]: only position 2 contributes, p_0 = 0.7.
        let p = bit_posteriors(&[0.3, 0.7]).unwrap();
        assert_eq!(p.len(), 1);
        assert!((p[0] - 0.7).abs() < 1e-15);
    }

    #[test]
    fn uniform_weights_give_half() {
        for m in [2usize, 4, 8, 16] {
            let p = bit_posteriors(&vec![1.0; m]).unwrap();
            for &v in &p {
                assert!((v - 0.5).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn one_hot_recovers_index_bits() {
        // One-hot at index v: posteriors equal v's big-endian bits exactly.
        for m in [4usize, 8] {
            let log_m = m.trailing_zeros() as usize;
            for v in 0..m {
                let mut w = vec![0.0; m];
                w[v] = 2.5;
                let p = bit_posteriors(&w).unwrap();
                for (b, &pb) in p.iter().enumerate() {
                    let bit = (v >> (log_m - 1 - b)) & 1;
                    assert_eq!(pb, bit as f64, "m={m}, v={v}, b={b}");
                }
            }
        }
    }

    #[test]
    fn rejects_bad_sections() {
        assert!(bit_posteriors(&[0.0, 0.0]).is_err());
        assert!(bit_posteriors(&[1.0, 2.0, 3.0]).is_err());
        assert!(bit_posteriors(&[1.0, -0.5]).is_err());
    }

    proptest::proptest! {
        #[test]
        fn outputs_stay_in_unit_interval(
            weights in proptest::collection::vec(0.0f64..1e6, 16)
        ) {
            proptest::prop_assume!(weights.iter().sum::<f64>() > 0.0);
            let p = bit_posteriors(&weights).unwrap();
            for &v in &p {
                proptest::prop_assert!((-1e-12..=1.0 + 1e-12).contains(&v), "p = {v}");
            }
        }
    }
}
