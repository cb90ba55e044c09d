//! Paired-simulation checks at the monograph's working scale: the adaptive
//! successive soft-decision decoder against AMP, and the hard-decision
//! decoder's threshold ordering.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use sparc_core::amp::{amp_decode, AmpConfig};
use sparc_core::design::{DesignKind, DesignOperator};
use sparc_core::legacy::{adaptive_hard_decode, adaptive_soft_decode};
use sparc_core::power::alloc_exponential;
use sparc_core::rng::stream_rng2;
use sparc_core::se::{se_trajectory, SeMode};
use sparc_core::{compute_metrics, MessageVector, SparcParams};
use sparc_sim::trial_seed;

fn add_noise(y: &mut [f64], sigma_sq: f64, rng: &mut impl Rng) {
    let sd = sigma_sq.sqrt();
    for v in y.iter_mut() {
        let z: f64 = rng.sample(StandardNormal);
        *v += sd * z;
    }
}

/// snr = 15, R = 0.7C, L = 1024, M = 512, T = T* = 8: the two SE-tracked
/// soft decoders land within a factor two of each other's section error
/// rate, paired over 200 trials.
#[test]
fn adaptive_soft_matches_amp_within_two_x() {
    let snr = 15.0f64;
    let c = 0.5 * (1.0 + snr).ln();
    let params = SparcParams::new(1024, 512, 0.7 * c, snr, 1.0).unwrap();
    let alloc = alloc_exponential(&params);
    let se = se_trajectory(&alloc, &params, SeMode::Soft, 600, 12, 21);
    let t_star = 8usize;
    let trials = 200usize;

    let results: Vec<(f64, f64)> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let op =
                DesignOperator::build(DesignKind::Hadamard, &params, trial_seed(2100, t as u64))
                    .unwrap();
            let mut rng = stream_rng2(2100, t as u64, 5);
            let msg = MessageVector::random(params.l, params.m, &mut rng);
            let mut y = op.forward(&msg, &alloc).unwrap();
            add_noise(&mut y, params.noise_var, &mut rng);

            let amp = amp_decode(&op, &y, &alloc, &params, &AmpConfig::online(20)).unwrap();
            let soft =
                adaptive_soft_decode(&op, &y, &alloc, &params, &se.tau_sq, t_star).unwrap();
            let ser_amp =
                compute_metrics(&msg, &amp.message, &params).unwrap().section_error_rate;
            let ser_soft =
                compute_metrics(&msg, &soft.message, &params).unwrap().section_error_rate;
            (ser_amp, ser_soft)
        })
        .collect();

    let mean = |f: &dyn Fn(&(f64, f64)) -> f64| results.iter().map(f).sum::<f64>() / trials as f64;
    let ser_amp = mean(&|r| r.0);
    let ser_soft = mean(&|r| r.1);
    // Sampling slack: one section over the whole run per side.
    let floor = 1.0 / (trials as f64 * params.l as f64);
    assert!(
        ser_soft <= 2.0 * ser_amp + 2.0 * floor && ser_amp <= 2.0 * ser_soft + 2.0 * floor,
        "SER amp = {ser_amp:.3e}, soft = {ser_soft:.3e}"
    );
    println!("paired SER: amp = {ser_amp:.3e}, adaptive-soft = {ser_soft:.3e}");
}

/// Hard-decision threshold ordering at the monograph scale: smaller
/// threshold offsets decode at least as many sections, and the undecoded
/// power fraction shrinks with the step count.
#[test]
fn hard_decoder_threshold_ordering_at_scale() {
    let snr = 15.0f64;
    let c = 0.5 * (1.0 + snr).ln();
    let params = SparcParams::new(1024, 512, 0.7 * c, snr, 1.0).unwrap();
    let alloc = alloc_exponential(&params);
    let op = DesignOperator::build(DesignKind::Hadamard, &params, 3100).unwrap();
    let mut rng = stream_rng2(3100, 0, 0);
    let msg = MessageVector::random(params.l, params.m, &mut rng);
    let mut y = op.forward(&msg, &alloc).unwrap();
    add_noise(&mut y, params.noise_var, &mut rng);
    let steps = (snr * (params.m as f64).ln()).ceil() as usize;

    let undecoded_power = |a: f64| -> f64 {
        let out = adaptive_hard_decode(&op, &y, &alloc, &params, a, steps).unwrap();
        out.decided
            .iter()
            .zip(alloc.values())
            .filter(|(&d, _)| !d)
            .map(|(_, &p)| p)
            .sum::<f64>()
            / params.power
    };
    let u0 = undecoded_power(0.0);
    let u08 = undecoded_power(0.8);
    let u1 = undecoded_power(1.0);
    assert!(u0 <= u08 + 1e-12 && u08 <= u1 + 1e-12, "ordering broken: {u0} {u08} {u1}");
    // The SE-hard curves show the same ordering.
    let se = |a: f64| se_trajectory(&alloc, &params, SeMode::Hard { a }, 1, 12, 0);
    let (s0, s08, s1) = (se(0.0), se(0.8), se(1.0));
    for t in 1..6 {
        assert!(s0.x[t] >= s08.x[t] && s08.x[t] >= s1.x[t]);
    }
}
