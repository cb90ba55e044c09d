use sparc_core::sc::{build_base, sc_amp_decode_with, sc_se_trajectory, ScAmpConfig, ScDesign};
use sparc_core::design::DesignKind;
use sparc_core::{MessageVector, SparcParams, compute_metrics};
use sparc_core::rng::stream_rng2;
use rand::Rng;
use rand_distr::StandardNormal;

fn main() {
    let snr = 15.0f64;
    let (omega, lambda) = (6usize, 32usize);
    let n = 12284usize;
    let params = SparcParams::with_exact_rate(n, 2048, 512, snr, 1.0).unwrap();
    let base = build_base(omega, lambda, snr).unwrap();
    let se = sc_se_trajectory(&base, params.rate_nats, 512, 1.0, 4000, 60, 701);
    let scd = ScDesign::new(base.clone(), &params, DesignKind::Hadamard, 700).unwrap();
    let cfg = ScAmpConfig { max_iters: 60, online_tau: true, mc_samples: 0, se_seed: 0 };
    let spb = scd.sections_per_block();
    let trials = 100u64;
    let mut acc = vec![vec![0.0f64; lambda]; 60];
    let mut sers = 0.0;
    for t in 0..trials {
        let mut rng = stream_rng2(702, t, 0);
        let msg = MessageVector::random(params.l, params.m, &mut rng);
        let mut beta_true = vec![0.0f64; params.l * params.m];
        for (sec, &j) in msg.sections().iter().enumerate() { beta_true[sec * params.m + j] = 1.0; }
        let mut y = scd.encode(&msg).unwrap();
        for v in y.iter_mut() { let z: f64 = rng.sample(StandardNormal); *v += z; }
        let mut rows: Vec<Vec<f64>> = Vec::new();
        let dec = sc_amp_decode_with(&scd, &y, &cfg, |it| {
            let mut row = vec![0.0f64; lambda];
            for c in 0..lambda {
                let lo = c * spb * params.m; let hi = (c+1) * spb * params.m;
                row[c] = it.beta_after[lo..hi].iter().zip(&beta_true[lo..hi])
                    .map(|(&a,&b)| (a-b)*(a-b)).sum::<f64>() / spb as f64;
            }
            rows.push(row);
        }).unwrap();
        for it in 0..60usize {
            let row = rows.get(it).or_else(|| rows.last()).unwrap();
            for c in 0..lambda { acc[it][c] += row[c]; }
        }
        sers += compute_metrics(&msg, &dec.message, &params).unwrap().section_error_rate;
    }
    println!("mean SER = {:.4}", sers / trials as f64);
    for &it in &[1usize, 5, 10, 15] {
        let pred = se.psi_after(it);
        let mut maxdev = 0.0f64; let mut at = 0;
        for c in 0..lambda {
            let emp = acc[it-1][c] / trials as f64;
            let dev = (emp - pred[c]).abs();
            if dev > maxdev { maxdev = dev; at = c; }
        }
        println!("iter {it}: max |emp - psi| = {maxdev:.4} at block {at}");
    }
}
