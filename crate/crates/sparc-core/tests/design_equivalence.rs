//! Hadamard operators against an explicitly materialized sign matrix, plus
//! adjointness and codeword-power checks for all design kinds.

use rand::Rng;
use sparc_core::design::{fwht, DesignKind, DesignOperator, Operator};
use sparc_core::power::{alloc_flat, PowerAllocation};
use sparc_core::rng::stream_rng;
use sparc_core::{MessageVector, SparcParams};

/// Dense `n x ML` matrix from the operator's row permutations, built from
/// the Hadamard sign rule `H[r][c] = (-1)^popcount(r & c)` — independent of
/// the FWHT application path.
fn materialize_hadamard(op: &DesignOperator) -> Vec<Vec<f64>> {
    let scale = 1.0 / (op.n() as f64).sqrt();
    let mut dense = vec![vec![0.0; op.sections() * op.m()]; op.n()];
    for sec in 0..op.sections() {
        let rows = op.hadamard_rows(sec).unwrap();
        for (i, &r) in rows.iter().enumerate() {
            for j in 0..op.m() {
                let c = (j + 1) as u32;
                let sign = if (r & c).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
                dense[i][sec * op.m() + j] = sign * scale;
            }
        }
    }
    dense
}

#[test]
fn hadamard_matches_sign_matrix_on_grid() {
    for &(n, l, m) in &[(8usize, 1usize, 4usize), (16, 2, 4), (24, 3, 8), (64, 4, 16), (33, 2, 16)] {
        let params = SparcParams::with_exact_rate(n, l, m, 1.0, 1.0).unwrap();
        let op = DesignOperator::build(DesignKind::Hadamard, &params, 1000 + n as u64).unwrap();
        let dense = materialize_hadamard(&op);
        let mut rng = stream_rng(n as u64, 17);

        // Forward on a random dense beta.
        let beta: Vec<f64> = (0..l * m).map(|_| rng.random::<f64>() - 0.5).collect();
        let fast = op.forward_dense(&beta);
        for i in 0..n {
            let direct: f64 = dense[i].iter().zip(&beta).map(|(&a, &b)| a * b).sum();
            assert!((fast[i] - direct).abs() < 1e-10, "forward mismatch at ({n},{l},{m})");
        }

        // Adjoint on a random probe.
        let v: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
        let fast = op.adjoint(&v);
        for j in 0..l * m {
            let direct: f64 = (0..n).map(|i| dense[i][j] * v[i]).sum();
            assert!((fast[j] - direct).abs() < 1e-10, "adjoint mismatch at ({n},{l},{m})");
        }
    }
}

#[test]
fn adjointness_identity_on_random_probes() {
    let params = SparcParams::with_exact_rate(48, 3, 16, 1.0, 1.0).unwrap();
    for kind in [DesignKind::Gaussian, DesignKind::Bernoulli, DesignKind::Hadamard] {
        let op = DesignOperator::build(kind, &params, 5).unwrap();
        let mut rng = stream_rng(77, kind as u64);
        for _ in 0..100 {
            let beta: Vec<f64> = (0..48).map(|_| rng.random::<f64>() - 0.5).collect();
            let v: Vec<f64> = (0..48).map(|_| rng.random::<f64>() - 0.5).collect();
            let a_beta = op.forward_dense(&beta);
            let at_v = op.adjoint(&v);
            let lhs: f64 = a_beta.iter().zip(&v).map(|(&x, &y)| x * y).sum();
            let rhs: f64 = beta.iter().zip(&at_v).map(|(&x, &y)| x * y).sum();
            assert!((lhs - rhs).abs() < 1e-9, "{kind:?}: {lhs} vs {rhs}");
        }
    }
}

#[test]
fn adjoint_of_forward_matches_gram_on_tiny_instance() {
    // A^T (A e) against the explicit Gram column on n = 16.
    let params = SparcParams::with_exact_rate(16, 2, 4, 1.0, 1.0).unwrap();
    let op = DesignOperator::build(DesignKind::Hadamard, &params, 9).unwrap();
    let dense = materialize_hadamard(&op);
    for col in 0..8 {
        let mut e = vec![0.0; 8];
        e[col] = 1.0;
        let ae = op.forward_dense(&e);
        let ata_e = op.adjoint(&ae);
        for j in 0..8 {
            let direct: f64 = (0..16).map(|i| dense[i][j] * dense[i][col]).sum();
            assert!((ata_e[j] - direct).abs() < 1e-10);
        }
    }
}

#[test]
fn codeword_power_concentrates_for_most_seeds() {
    // Flat allocation at n = 4096: per-sample power within 10% of P for at
    // least 99 of 100 seeds.
    let params = SparcParams::with_exact_rate(4096, 32, 16, 2.0, 1.0).unwrap();
    let alloc = alloc_flat(&params);
    let mut ok = 0;
    for seed in 0..100u64 {
        let op = DesignOperator::build(DesignKind::Hadamard, &params, seed).unwrap();
        let mut rng = stream_rng(seed, 3);
        let msg = MessageVector::random(params.l, params.m, &mut rng);
        let x = op.forward(&msg, &alloc).unwrap();
        let power: f64 = x.iter().map(|&v| v * v).sum::<f64>() / params.n as f64;
        if (power - params.power).abs() < 0.1 * params.power {
            ok += 1;
        }
    }
    assert!(ok >= 99, "power concentrated for only {ok}/100 seeds");
}

#[test]
fn gaussian_kind_matches_explicit_dense_multiply() {
    // The sparse encode path and a hand-rolled dense multiply share the same
    // arithmetic on a materialized Gaussian design.
    let params = SparcParams::with_exact_rate(16, 2, 4, 1.0, 1.0).unwrap();
    let op = DesignOperator::build(DesignKind::Gaussian, &params, 4).unwrap();
    let msg = MessageVector::new(vec![2, 1], 4).unwrap();
    let alloc = PowerAllocation::from_values(vec![0.6, 0.4]);
    let y = op.forward(&msg, &alloc).unwrap();
    let mut expected = vec![0.0; 16];
    let mut col = vec![0.0; 16];
    for (sec, &j) in msg.sections().iter().enumerate() {
        op.column_into(sec, j, &mut col);
        let c = alloc.coefficient(sec, 16);
        for (e, &a) in expected.iter_mut().zip(&col) {
            *e += c * a;
        }
    }
    assert_eq!(y, expected);
}

#[test]
fn fwht_agrees_with_walsh_rows() {
    // Cross-check the butterfly against the direct sign-sum definition.
    let mut rng = stream_rng(2, 2);
    let x: Vec<f64> = (0..32).map(|_| rng.random::<f64>() - 0.5).collect();
    let mut y = x.clone();
    fwht(&mut y).unwrap();
    for r in 0..32u32 {
        let direct: f64 = x
            .iter()
            .enumerate()
            .map(|(c, &v)| if (r & c as u32).count_ones() % 2 == 0 { v } else { -v })
            .sum();
        assert!((y[r as usize] - direct).abs() < 1e-12);
    }
}
