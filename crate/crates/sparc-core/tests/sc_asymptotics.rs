//! The indicator-form asymptotic recursion as an oracle for the Monte-Carlo
//! SC state evolution and the closed-form progression bounds.

use sparc_core::rng::stream_rng2;
use sparc_core::sc::{build_base, sc_progression, ScProgression};
use sparc_core::se::sent_weight_mc;

/// Direct simulation of the asymptotic (large-M) SC state evolution: psi-bar
/// flips from 1 to 0 once a column's signal-to-noise sum crosses 2R.
/// Returns the per-iteration psi-bar profiles.
fn asymptotic_recursion(
    omega: usize,
    lambda: usize,
    rate_nats: f64,
    snr: f64,
    max_iters: usize,
) -> Vec<Vec<f64>> {
    let base = build_base(omega, lambda, snr).unwrap(); // sigma^2 = 1 scale
    let (l_r, l_c) = (base.rows(), base.cols());
    let mut psi = vec![1.0f64; l_c];
    let mut history = vec![psi.clone()];
    for _ in 0..max_iters {
        let phi: Vec<f64> = (0..l_r)
            .map(|r| 1.0 + (0..l_c).map(|c| base.get(r, c) * psi[c]).sum::<f64>() / l_c as f64)
            .collect();
        let next: Vec<f64> = (0..l_c)
            .map(|c| {
                let gain: f64 = (0..l_r).map(|r| base.get(r, c) / phi[r]).sum::<f64>() / l_r as f64;
                if gain > 2.0 * rate_nats {
                    0.0
                } else {
                    1.0
                }
            })
            .collect();
        let done = next == psi;
        psi = next;
        history.push(psi.clone());
        if done {
            break;
        }
    }
    history
}

#[test]
fn indicator_recursion_agrees_with_mc_expectation_at_large_m() {
    // Away from the decodability boundary (the limit is undefined exactly at
    // the threshold), the indicator and the Monte-Carlo expectation at
    // M = 2^16 agree: indicator-1 states have E close to one, indicator-0
    // states stay weak.
    let m = 1usize << 16;
    let ln_m = (m as f64).ln();
    // At M = 2^16 the transition has width ~1/sqrt(ln M) in sqrt(gain/2R);
    // states classified with this margin are decisively on one side.
    let up_margin = 1.7;
    let down_margin = 1.15;
    let cases = [(2usize, 4usize, 0.35f64, 7.0f64), (3, 8, 0.5, 15.0), (2, 6, 0.25, 4.0)];
    let mut asserted = 0;
    for &(omega, lambda, rate, snr) in &cases {
        let base = build_base(omega, lambda, snr).unwrap();
        let (l_r, l_c) = (base.rows(), base.cols());
        let history = asymptotic_recursion(omega, lambda, rate, snr, 12);
        for (t, psi_bar) in history.iter().enumerate().take(history.len() - 1) {
            // Evaluate the MC expectation at the asymptotic state.
            let phi: Vec<f64> = (0..l_r)
                .map(|r| {
                    1.0 + (0..l_c).map(|c| base.get(r, c) * psi_bar[c]).sum::<f64>() / l_c as f64
                })
                .collect();
            for c in 0..l_c {
                let gain: f64 =
                    (0..l_r).map(|r| base.get(r, c) / phi[r]).sum::<f64>() / l_r as f64;
                let tau_c = rate / (ln_m * gain);
                let mut rng = stream_rng2(8, (omega * 100 + t) as u64, c as u64);
                if gain > 2.0 * rate * up_margin {
                    let e = sent_weight_mc(1.0 / tau_c.sqrt(), m, 120, &mut rng);
                    assert!(
                        e > 0.9,
                        "(omega={omega}, Lambda={lambda}, R={rate}): indicator decodes \
                         column {c} at t={t} but MC expectation is {e:.3}"
                    );
                    asserted += 1;
                } else if gain < 2.0 * rate / down_margin {
                    let e = sent_weight_mc(1.0 / tau_c.sqrt(), m, 120, &mut rng);
                    assert!(
                        e < 0.5,
                        "(omega={omega}, Lambda={lambda}, R={rate}): indicator stalls on \
                         column {c} at t={t} but MC expectation is {e:.3}"
                    );
                    asserted += 1;
                }
            }
        }
    }
    assert!(asserted >= 8, "grid produced too few decisive states ({asserted})");
}

#[test]
fn progression_bound_is_confirmed_by_the_recursion() {
    // Whenever the closed forms say decoding starts, the indicator recursion
    // reaches the all-zero profile within the reported iteration bound.
    let snr = 15.0f64;
    let c = 0.5 * (1.0 + snr).ln();
    let grid = [
        (2usize, 8usize, 0.30 * c),
        (3, 8, 0.35 * c),
        (4, 12, 0.40 * c),
        (6, 32, 0.50 * c),
        (6, 32, 0.75 * c),
        (8, 24, 0.45 * c),
        (2, 16, 0.30 * c),
        (4, 16, 0.40 * c),
        (5, 20, 0.45 * c),
        (6, 16, 0.50 * c),
    ];
    let mut confirmed = 0;
    for &(omega, lambda, rate) in &grid {
        match sc_progression(omega, lambda, rate, snr).unwrap() {
            ScProgression::Evaluated { can_start: true, max_iterations: Some(bound), .. } => {
                let history = asymptotic_recursion(omega, lambda, rate, snr, bound + 1);
                let decoded = history
                    .iter()
                    .position(|psi| psi.iter().all(|&v| v == 0.0))
                    .unwrap_or(usize::MAX);
                assert!(
                    decoded <= bound,
                    "(omega={omega}, Lambda={lambda}, R={rate:.3}): bound {bound} but \
                     recursion needs {decoded} iterations"
                );
                confirmed += 1;
            }
            _ => {}
        }
    }
    assert!(confirmed >= 5, "too few grid points started decoding ({confirmed})");
}

#[test]
fn c_star_bound_matches_direct_first_iteration_count() {
    // The closed-form c* lower-bounds the columns the recursion decodes from
    // each end in its first iteration.
    let snr = 0.5;
    for &(omega, lambda, rate) in &[(6usize, 32usize, 0.10f64), (4, 16, 0.12), (3, 12, 0.14)] {
        if let ScProgression::Evaluated { can_start: true, c_star_lower_bound, .. } =
            sc_progression(omega, lambda, rate, snr).unwrap()
        {
            let history = asymptotic_recursion(omega, lambda, rate, snr, 2);
            let psi1 = &history[1];
            let decoded_prefix = psi1.iter().take_while(|&&v| v == 0.0).count();
            assert!(
                decoded_prefix >= c_star_lower_bound,
                "(omega={omega}, Lambda={lambda}, R={rate}): c* = {c_star_lower_bound} \
                 but only {decoded_prefix} columns decoded"
            );
        }
    }
}
