//! Experiment execution and CSV emission.
//!
//! Every trial derives its own random stream from `(master seed, trial id)`,
//! so results are independent of worker count and scheduling. Records are
//! collected in trial order and the summary is recomputed from them
//! sequentially; reruns produce byte-identical output.

use crate::config::{AllocScheme, DesignChoice, ExperimentConfig, Scenario};
use crate::{design_seed, se_seed, trial_seed};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use sparc_core::amp::{amp_decode, AmpConfig};
use sparc_core::compress::{distortion, reconstruct, sc_encode, CompressParams, SelectionRule};
use sparc_core::design::{DesignOperator, PrefixOperator};
use sparc_core::multiuser::{
    bc_build, bc_design, gp_toy, mac_build, mac_design, wz_toy, GpConfig, WzConfig,
};
use sparc_core::oracle::SearchBudget;
use sparc_core::power::{
    alloc_exponential, alloc_flat, alloc_iterative, alloc_modified, PowerAllocation,
};
use sparc_core::rng::stream_rng;
use sparc_core::sc::{build_base, sc_amp_decode_with, sc_se_trajectory, ScAmpConfig, ScSeTrajectory};
use sparc_core::se::{se_trajectory, SeMode};
use sparc_core::{compute_metrics, Error as CoreError, MessageVector, SparcParams};
use std::fmt;
use std::io::Write;

/// Harness-level errors, carrying the process exit code.
#[derive(Debug)]
pub enum SimError {
    /// Invalid configuration (exit code 2).
    Config(String),
    /// Numeric divergence in a decoder (exit code 3).
    Divergence { trial: usize, iteration: usize },
    /// I/O failure (exit code 1).
    Io(std::io::Error),
}

impl fmt::Display for SimError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SimError::Config(msg) => write!(f, "configuration error: {msg}"),
            SimError::Divergence { trial, iteration } => {
                write!(f, "numeric divergence in trial {trial} at iteration {iteration}")
            }
            SimError::Io(e) => write!(f, "io error: {e}"),
        }
    }
}

impl std::error::Error for SimError {}

impl SimError {
    pub fn exit_code(&self) -> i32 {
        match self {
            SimError::Config(_) => 2,
            SimError::Divergence { .. } => 3,
            SimError::Io(_) => 1,
        }
    }

    fn from_core(e: CoreError, trial: usize) -> Self {
        match e {
            CoreError::Divergence { iteration } => SimError::Divergence { trial, iteration },
            other => SimError::Config(other.to_string()),
        }
    }
}

impl From<std::io::Error> for SimError {
    fn from(e: std::io::Error) -> Self {
        SimError::Io(e)
    }
}

fn core_cfg(e: CoreError) -> SimError {
    SimError::from_core(e, 0)
}

/// Builds the configured power allocation.
pub fn build_alloc(
    scheme: AllocScheme,
    params: &SparcParams,
) -> Result<PowerAllocation, SimError> {
    Ok(match scheme {
        AllocScheme::Flat => alloc_flat(params),
        AllocScheme::Exponential => alloc_exponential(params),
        AllocScheme::Modified { a, f } => alloc_modified(params, a, f).map_err(core_cfg)?,
        AllocScheme::Iterative { blocks, r_pa } => {
            let b = if blocks == 0 { params.l } else { blocks };
            let r = r_pa.map(|r| r.nats).unwrap_or(params.rate_nats);
            alloc_iterative(params, b, r).map_err(core_cfg)?
        }
    })
}

fn build_operator(
    design: DesignChoice,
    params: &SparcParams,
    seed: u64,
) -> Result<DesignOperator, SimError> {
    if matches!(design, DesignChoice::Gaussian | DesignChoice::Bernoulli) {
        let entries = params.n as u128 * params.l as u128 * params.m as u128;
        if entries > 100_000_000 {
            return Err(SimError::Config(format!(
                "dense {design:?} design would materialize {entries} entries; \
                 use the hadamard design at this scale"
            )));
        }
    }
    DesignOperator::build(design.kind(), params, seed).map_err(core_cfg)
}

fn add_noise(y: &mut [f64], sigma_sq: f64, rng: &mut impl Rng) {
    let sd = sigma_sq.sqrt();
    for v in y.iter_mut() {
        let z: f64 = rng.sample(StandardNormal);
        *v += sd * z;
    }
}

fn pool(workers: usize) -> Result<rayon::ThreadPool, SimError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| SimError::Config(format!("worker pool: {e}")))
}

/// Mean and standard error of a sequence.
fn mean_se(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = values.clone().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// One decoded channel trial.
#[derive(Debug, Clone)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub ser: f64,
    pub ber: f64,
    pub codeword_error: bool,
    pub iterations: usize,
    pub tau_hat_final: f64,
}

fn write_trial_header(out: &mut impl Write, cfg: &ExperimentConfig) -> std::io::Result<()> {
    writeln!(
        out,
        "# sparc-sim csv v1 scenario={} seed={} trials={}",
        cfg.scenario.name(),
        cfg.seed,
        cfg.trials
    )?;
    writeln!(out, "trial,seed,ser,ber,codeword_error,iterations,tau_hat_final")
}

fn write_trials_and_summary(
    out: &mut impl Write,
    records: &[TrialRecord],
) -> std::io::Result<()> {
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.trial, r.seed, r.ser, r.ber, r.codeword_error as u8, r.iterations, r.tau_hat_final
        )?;
    }
    let (mean_ser, se_ser) = mean_se(records.iter().map(|r| r.ser));
    let (mean_ber, se_ber) = mean_se(records.iter().map(|r| r.ber));
    let (cwer, se_cwer) = mean_se(records.iter().map(|r| r.codeword_error as u8 as f64));
    let (mean_iters, _) = mean_se(records.iter().map(|r| r.iterations as f64));
    writeln!(
        out,
        "# summary trials={} mean_ser={} se_ser={} mean_ber={} se_ber={} \
         codeword_error_rate={} se_cwer={} mean_iterations={}",
        records.len(),
        mean_ser,
        se_ser,
        mean_ber,
        se_ber,
        cwer,
        se_cwer,
        mean_iters
    )
}

fn collect_trials<T: Send>(
    cfg: &ExperimentConfig,
    run_one: impl Fn(usize, u64) -> Result<T, SimError> + Sync,
) -> Result<Vec<T>, SimError> {
    if cfg.trials == 0 {
        return Err(SimError::Config("field trials: must be at least 1".into()));
    }
    let results: Vec<Result<T, SimError>> = pool(cfg.workers)?.install(|| {
        (0..cfg.trials)
            .into_par_iter()
            .map(|t| run_one(t, trial_seed(cfg.seed, t as u64)))
            .collect()
    });
    // Deterministic error reporting: the lowest failing trial wins.
    let mut out = Vec::with_capacity(results.len());
    for r in results {
        out.push(r?);
    }
    Ok(out)
}

/// Runs an experiment and writes its CSV to `out`.
pub fn run_experiment(cfg: &ExperimentConfig, out: &mut impl Write) -> Result<(), SimError> {
    match cfg.scenario {
        Scenario::Channel => run_channel(cfg, out),
        Scenario::ScChannel => run_sc_channel(cfg, out),
        Scenario::Broadcast => run_broadcast(cfg, out),
        Scenario::Mac => run_mac(cfg, out),
        Scenario::Compress => run_compress(cfg, out),
        Scenario::Se => run_se(cfg, out),
        Scenario::Alloc => run_alloc(cfg, out),
        Scenario::Wz => run_wz(cfg, out),
        Scenario::Gp => run_gp(cfg, out),
    }
}

fn channel_params(cfg: &ExperimentConfig) -> Result<SparcParams, SimError> {
    let (power, noise_var) = cfg.power_noise();
    let rate = cfg
        .rate
        .ok_or_else(|| SimError::Config("field rate: required for this scenario".into()))?;
    match cfg.n {
        Some(n) => SparcParams::with_block_length(n, cfg.l, cfg.m, rate.nats, power, noise_var),
        None => SparcParams::new(cfg.l, cfg.m, rate.nats, power, noise_var),
    }
    .map_err(core_cfg)
}

fn run_channel(cfg: &ExperimentConfig, out: &mut impl Write) -> Result<(), SimError> {
    let params = channel_params(cfg)?;
    let alloc = build_alloc(cfg.alloc, &params)?;
    let op = build_operator(cfg.design, &params, design_seed(cfg.seed))?;
    let amp_cfg = AmpConfig::online(cfg.max_iters);

    let records = collect_trials(cfg, |t, seed| {
        let mut rng = stream_rng(seed, 0);
        let msg = MessageVector::random(params.l, params.m, &mut rng);
        let mut y = op.forward(&msg, &alloc).map_err(|e| SimError::from_core(e, t))?;
        add_noise(&mut y, params.noise_var, &mut rng);
        let dec = amp_decode(&op, &y, &alloc, &params, &amp_cfg)
            .map_err(|e| SimError::from_core(e, t))?;
        let metrics =
            compute_metrics(&msg, &dec.message, &params).map_err(|e| SimError::from_core(e, t))?;
        Ok(TrialRecord {
            trial: t,
            seed,
            ser: metrics.section_error_rate,
            ber: metrics.bit_error_rate,
            codeword_error: metrics.codeword_error,
            iterations: dec.iterations,
            tau_hat_final: dec.tau_sq_trajectory.last().copied().unwrap_or(f64::NAN),
        })
    })?;

    write_trial_header(out, cfg)?;
    write_trials_and_summary(out, &records)?;
    Ok(())
}

/// Spatially coupled geometry: the block length must be a multiple of
/// `Lambda + omega - 1`; when derived from the rate it is rounded up.
pub fn sc_geometry(cfg: &ExperimentConfig) -> Result<(SparcParams, usize, usize), SimError> {
    let (power, noise_var) = cfg.power_noise();
    let l_r = cfg.lambda + cfg.omega - 1;
    if cfg.lambda == 0 || cfg.l % cfg.lambda != 0 {
        return Err(SimError::Config(format!(
            "field lambda: L_C = {} must divide L = {}",
            cfg.lambda, cfg.l
        )));
    }
    let n = match (cfg.n, cfg.rate) {
        (Some(n), _) => n,
        (None, Some(rate)) => {
            let raw = (cfg.l as f64 * (cfg.m as f64).ln() / rate.nats).ceil() as usize;
            raw.div_ceil(l_r) * l_r
        }
        (None, None) => {
            return Err(SimError::Config("field rate: required when n is not given".into()))
        }
    };
    if n % l_r != 0 {
        return Err(SimError::Config(format!(
            "field n: must be a multiple of Lambda + omega - 1 = {l_r}, got {n}"
        )));
    }
    let params = SparcParams::with_exact_rate(n, cfg.l, cfg.m, power, noise_var).map_err(core_cfg)?;
    Ok((params, cfg.omega, cfg.lambda))
}

struct ScTrialOutput {
    record: TrialRecord,
    /// Per-iteration, per-column-block empirical NMSE.
    nmse: Vec<Vec<f64>>,
}

fn run_sc_channel(cfg: &ExperimentConfig, out: &mut impl Write) -> Result<(), SimError> {
    let (params, omega, lambda) = sc_geometry(cfg)?;
    let base = build_base(omega, lambda, params.power).map_err(core_cfg)?;
    let scd = sparc_core::sc::ScDesign::new(base.clone(), &params, cfg.design.kind(), design_seed(cfg.seed))
        .map_err(core_cfg)?;
    // One state-evolution trajectory for the prediction column; decoding
    // itself runs with online variance estimates.
    let se: ScSeTrajectory = sc_se_trajectory(
        &base,
        params.rate_nats,
        params.m,
        params.noise_var,
        cfg.mc_samples,
        cfg.max_iters,
        se_seed(cfg.seed),
    );
    let amp_cfg = ScAmpConfig::online(cfg.max_iters);
    let spb = scd.sections_per_block();

    let trials = collect_trials(cfg, |t, seed| {
        let mut rng = stream_rng(seed, 0);
        let msg = MessageVector::random(params.l, params.m, &mut rng);
        let mut beta_true = vec![0.0f64; params.l * params.m];
        for (sec, &j) in msg.sections().iter().enumerate() {
            beta_true[sec * params.m + j] = 1.0;
        }
        let mut y = scd.encode(&msg).map_err(|e| SimError::from_core(e, t))?;
        add_noise(&mut y, params.noise_var, &mut rng);
        let mut nmse = Vec::new();
        let dec = sc_amp_decode_with(&scd, &y, &amp_cfg, |it| {
            let mut per_block = vec![0.0f64; lambda];
            for (c, slot) in per_block.iter_mut().enumerate() {
                let lo = c * spb * params.m;
                let hi = (c + 1) * spb * params.m;
                *slot = it.beta_after[lo..hi]
                    .iter()
                    .zip(&beta_true[lo..hi])
                    .map(|(&a, &b)| (a - b) * (a - b))
                    .sum::<f64>()
                    / spb as f64;
            }
            nmse.push(per_block);
        })
        .map_err(|e| SimError::from_core(e, t))?;
        let metrics =
            compute_metrics(&msg, &dec.message, &params).map_err(|e| SimError::from_core(e, t))?;
        Ok(ScTrialOutput {
            record: TrialRecord {
                trial: t,
                seed,
                ser: metrics.section_error_rate,
                ber: metrics.bit_error_rate,
                codeword_error: metrics.codeword_error,
                iterations: dec.iterations,
                tau_hat_final: f64::NAN,
            },
            nmse,
        })
    })?;

    writeln!(
        out,
        "# sparc-sim csv v1 scenario=sc-channel seed={} trials={} omega={} lambda={} n={}",
        cfg.seed, cfg.trials, omega, lambda, params.n
    )?;
    writeln!(out, "iteration,block,nmse,se_prediction")?;
    let iterations = trials.iter().map(|t| t.nmse.len()).max().unwrap_or(0);
    for it in 0..iterations {
        for c in 0..lambda {
            // Early-stopped trials have converged; their last profile stands.
            let acc: f64 = trials
                .iter()
                .map(|t| t.nmse.get(it).or_else(|| t.nmse.last()).map_or(0.0, |row| row[c]))
                .sum();
            let empirical = acc / trials.len().max(1) as f64;
            let predicted = se.psi_after(it + 1).get(c).copied().unwrap_or(f64::NAN);
            writeln!(out, "{},{},{},{}", it + 1, c, empirical, predicted)?;
        }
    }
    let records: Vec<TrialRecord> = trials.into_iter().map(|t| t.record).collect();
    let (mean_ser, se_ser) = mean_se(records.iter().map(|r| r.ser));
    let (mean_ber, se_ber) = mean_se(records.iter().map(|r| r.ber));
    let (cwer, se_cwer) = mean_se(records.iter().map(|r| r.codeword_error as u8 as f64));
    let (mean_iters, _) = mean_se(records.iter().map(|r| r.iterations as f64));
    writeln!(
        out,
        "# summary trials={} mean_ser={} se_ser={} mean_ber={} se_ber={} \
         codeword_error_rate={} se_cwer={} mean_iterations={}",
        records.len(),
        mean_ser,
        se_ser,
        mean_ber,
        se_ber,
        cwer,
        se_cwer,
        mean_iters
    )?;
    Ok(())
}

/// Builds everything the broadcast scenario shares across trials.
pub struct BroadcastSetup {
    pub code: sparc_core::multiuser::BroadcastCode,
    pub op: DesignOperator,
    pub sigma1_sq: f64,
    pub sigma2_sq: f64,
}

pub fn broadcast_setup(cfg: &ExperimentConfig) -> Result<BroadcastSetup, SimError> {
    let n = cfg.n.ok_or_else(|| SimError::Config("field n: required for bc".into()))?;
    let (user1, user2) = bc_design(
        n,
        cfg.m,
        cfg.power,
        cfg.sigma1_sq,
        cfg.sigma2_sq,
        cfg.alpha,
        cfg.gamma,
    )
    .map_err(core_cfg)?;
    let alloc1 = build_alloc(cfg.alloc, &user1)?;
    let alloc2 = build_alloc(cfg.alloc, &user2)?;
    let code = bc_build(&user1, &user2, alloc1, alloc2, cfg.sigma1_sq).map_err(core_cfg)?;
    let op = build_operator(cfg.design, &code.joint, design_seed(cfg.seed))?;
    Ok(BroadcastSetup { code, op, sigma1_sq: cfg.sigma1_sq, sigma2_sq: cfg.sigma2_sq })
}

/// Per-user error metrics for one multiuser trial.
#[derive(Debug, Clone)]
pub struct TwoUserRecord {
    pub trial: usize,
    pub seed: u64,
    pub ser1: f64,
    pub ber1: f64,
    pub cw1: bool,
    pub ser2: f64,
    pub ber2: f64,
    pub cw2: bool,
}

fn write_two_user(
    out: &mut impl Write,
    cfg: &ExperimentConfig,
    records: &[TwoUserRecord],
    extra: &str,
) -> std::io::Result<()> {
    writeln!(
        out,
        "# sparc-sim csv v1 scenario={} seed={} trials={}{extra}",
        cfg.scenario.name(),
        cfg.seed,
        cfg.trials
    )?;
    writeln!(out, "trial,seed,ser1,ber1,codeword_error1,ser2,ber2,codeword_error2")?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.trial, r.seed, r.ser1, r.ber1, r.cw1 as u8, r.ser2, r.ber2, r.cw2 as u8
        )?;
    }
    let (ser1, se1) = mean_se(records.iter().map(|r| r.ser1));
    let (ber1, seb1) = mean_se(records.iter().map(|r| r.ber1));
    let (ser2, se2) = mean_se(records.iter().map(|r| r.ser2));
    let (ber2, seb2) = mean_se(records.iter().map(|r| r.ber2));
    let (cw1, _) = mean_se(records.iter().map(|r| r.cw1 as u8 as f64));
    let (cw2, _) = mean_se(records.iter().map(|r| r.cw2 as u8 as f64));
    writeln!(
        out,
        "# summary trials={} mean_ser1={} se_ser1={} mean_ber1={} se_ber1={} cwer1={} \
         mean_ser2={} se_ser2={} mean_ber2={} se_ber2={} cwer2={}",
        records.len(),
        ser1,
        se1,
        ber1,
        seb1,
        cw1,
        ser2,
        se2,
        ber2,
        seb2,
        cw2
    )
}

fn run_broadcast(cfg: &ExperimentConfig, out: &mut impl Write) -> Result<(), SimError> {
    let setup = broadcast_setup(cfg)?;
    let code = &setup.code;
    let op = &setup.op;
    let rx2_view = PrefixOperator::new(op, code.user2.l).map_err(core_cfg)?;
    let amp_cfg = AmpConfig::online(cfg.max_iters);

    let records = collect_trials(cfg, |t, seed| {
        let mut rng = stream_rng(seed, 0);
        let msg1 = MessageVector::random(code.user1.l, code.joint.m, &mut rng);
        let msg2 = MessageVector::random(code.user2.l, code.joint.m, &mut rng);
        let joint_msg = code.assemble(&msg1, &msg2).map_err(|e| SimError::from_core(e, t))?;
        let x = op.forward(&joint_msg, &code.alloc_joint).map_err(|e| SimError::from_core(e, t))?;

        let mut y1 = x.clone();
        add_noise(&mut y1, setup.sigma1_sq, &mut rng);
        let mut y2 = x;
        add_noise(&mut y2, setup.sigma2_sq, &mut rng);

        // Receiver 2 sees only the A_2 prefix; interference is in its
        // effective noise variance already.
        let dec2 = amp_decode(&rx2_view, &y2, &code.alloc2, &code.user2, &amp_cfg)
            .map_err(|e| SimError::from_core(e, t))?;
        let m2 = compute_metrics(&msg2, &dec2.message, &code.user2)
            .map_err(|e| SimError::from_core(e, t))?;

        // Receiver 1 decodes the full concatenated code.
        let dec1 = amp_decode(op, &y1, &code.alloc_joint, &code.joint, &amp_cfg)
            .map_err(|e| SimError::from_core(e, t))?;
        let (dec1_user1, _) = code.split(&dec1.message);
        let m1 = compute_metrics(&msg1, &dec1_user1, &code.user1)
            .map_err(|e| SimError::from_core(e, t))?;

        Ok(TwoUserRecord {
            trial: t,
            seed,
            ser1: m1.section_error_rate,
            ber1: m1.bit_error_rate,
            cw1: m1.codeword_error,
            ser2: m2.section_error_rate,
            ber2: m2.bit_error_rate,
            cw2: m2.codeword_error,
        })
    })?;

    let extra = format!(
        " alpha={} gamma={} l1={} l2={}",
        cfg.alpha, cfg.gamma, code.user1.l, code.user2.l
    );
    write_two_user(out, cfg, &records, &extra)?;
    Ok(())
}

/// Builds everything the MAC scenario shares across trials.
pub struct MacSetup {
    pub code: sparc_core::multiuser::MacCode,
    pub op: DesignOperator,
}

pub fn mac_setup(cfg: &ExperimentConfig) -> Result<MacSetup, SimError> {
    let n = cfg.n.ok_or_else(|| SimError::Config("field n: required for mac".into()))?;
    let (user1, user2) =
        mac_design(n, cfg.m, cfg.p1, cfg.p2, cfg.noise_var, cfg.alpha, cfg.gamma)
            .map_err(core_cfg)?;
    let joint = SparcParams::with_block_length(
        n,
        user1.l + user2.l,
        cfg.m,
        user1.rate_nats + user2.rate_nats,
        cfg.p1 + cfg.p2,
        cfg.noise_var,
    )
    .map_err(core_cfg)?;
    let alloc_joint = build_alloc(cfg.alloc, &joint)?;
    let code = mac_build(&user1, &user2, alloc_joint).map_err(core_cfg)?;
    let op = build_operator(cfg.design, &code.joint, design_seed(cfg.seed))?;
    Ok(MacSetup { code, op })
}

fn run_mac(cfg: &ExperimentConfig, out: &mut impl Write) -> Result<(), SimError> {
    let setup = mac_setup(cfg)?;
    let code = &setup.code;
    let op = &setup.op;
    let amp_cfg = AmpConfig::online(cfg.max_iters);

    let records = collect_trials(cfg, |t, seed| {
        let mut rng = stream_rng(seed, 0);
        let msg1 = MessageVector::random(code.user1.l, code.joint.m, &mut rng);
        let msg2 = MessageVector::random(code.user2.l, code.joint.m, &mut rng);
        let joint_msg = code.assemble(&msg1, &msg2).map_err(|e| SimError::from_core(e, t))?;
        let mut y =
            op.forward(&joint_msg, &code.alloc_joint).map_err(|e| SimError::from_core(e, t))?;
        add_noise(&mut y, code.joint.noise_var, &mut rng);

        let dec = amp_decode(op, &y, &code.alloc_joint, &code.joint, &amp_cfg)
            .map_err(|e| SimError::from_core(e, t))?;
        let (dec1, dec2) = code.split(&dec.message);
        let m1 =
            compute_metrics(&msg1, &dec1, &code.user1).map_err(|e| SimError::from_core(e, t))?;
        let m2 =
            compute_metrics(&msg2, &dec2, &code.user2).map_err(|e| SimError::from_core(e, t))?;
        Ok(TwoUserRecord {
            trial: t,
            seed,
            ser1: m1.section_error_rate,
            ber1: m1.bit_error_rate,
            cw1: m1.codeword_error,
            ser2: m2.section_error_rate,
            ber2: m2.bit_error_rate,
            cw2: m2.codeword_error,
        })
    })?;

    let extra = format!(
        " alpha={} gamma={} l1={} l2={} bracket_user={} bracket_start={}",
        cfg.alpha,
        cfg.gamma,
        code.user1.l,
        code.user2.l,
        code.partition.chosen.user,
        code.partition.chosen.start
    );
    write_two_user(out, cfg, &records, &extra)?;
    Ok(())
}

fn run_compress(cfg: &ExperimentConfig, out: &mut impl Write) -> Result<(), SimError> {
    let rate = cfg
        .rate
        .ok_or_else(|| SimError::Config("field rate: required for compress".into()))?;
    let rule = if cfg.min_distance { SelectionRule::MinDistance } else { SelectionRule::Correlation };
    let round_pow2 = cfg.design == DesignChoice::Hadamard;
    let cp = match cfg.n {
        None => CompressParams::new(cfg.l, cfg.b_exponent, rate.nats, cfg.source_var, round_pow2, rule)
            .map_err(core_cfg)?,
        Some(n) => {
            // Pinned block length: round M as requested, derive the rate.
            let m_raw = (cfg.l as f64).powf(cfg.b_exponent);
            let m = if round_pow2 {
                1usize << (m_raw.log2().round() as u32)
            } else {
                m_raw.round() as usize
            };
            let params = SparcParams::with_exact_rate(n, cfg.l, m, cfg.source_var, cfg.source_var)
                .map_err(core_cfg)?;
            CompressParams::from_params(params, cfg.b_exponent, rule).map_err(core_cfg)?
        }
    };
    let op = build_operator(cfg.design, &cp.params, design_seed(cfg.seed))?;
    let n = cp.params.n;

    let file_samples: Option<Vec<f64>> = match &cfg.source_file {
        None => None,
        Some(path) => {
            let bytes = std::fs::read(path)
                .map_err(|e| SimError::Config(format!("field source_file: {e}")))?;
            if bytes.len() % 8 != 0 {
                return Err(SimError::Config(
                    "field source_file: length is not a multiple of 8 bytes".into(),
                ));
            }
            let samples: Vec<f64> = bytes
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            if samples.len() < n * cfg.trials {
                return Err(SimError::Config(format!(
                    "field source_file: need {} samples for {} trials, found {}",
                    n * cfg.trials,
                    cfg.trials,
                    samples.len()
                )));
            }
            Some(samples)
        }
    };

    struct CompressRecord {
        trial: usize,
        seed: u64,
        distortion: f64,
    }

    let records = collect_trials(cfg, |t, seed| {
        let source: Vec<f64> = match &file_samples {
            Some(samples) => samples[t * n..(t + 1) * n].to_vec(),
            None => {
                let mut rng = stream_rng(seed, 0);
                let sd = cfg.source_var.sqrt();
                (0..n).map(|_| rng.sample::<f64, _>(StandardNormal) * sd).collect()
            }
        };
        let msg = sc_encode(&op, &source, &cp).map_err(|e| SimError::from_core(e, t))?;
        let rec = reconstruct(&op, &msg, &cp).map_err(|e| SimError::from_core(e, t))?;
        Ok(CompressRecord { trial: t, seed, distortion: distortion(&source, &rec) })
    })?;

    writeln!(
        out,
        "# sparc-sim csv v1 scenario=compress seed={} trials={} l={} m={} n={} b={}",
        cfg.seed, cfg.trials, cp.params.l, cp.params.m, cp.params.n, cfg.b_exponent
    )?;
    writeln!(out, "trial,rate_bits,distortion")?;
    let rate_bits = cp.params.rate_bits();
    for r in &records {
        writeln!(out, "{},{},{}", r.trial, rate_bits, r.distortion)?;
        let _ = r.seed;
    }
    let (mean_d, se_d) = mean_se(records.iter().map(|r| r.distortion));
    let dstar = cfg.source_var * (-2.0 * cp.params.rate_nats).exp();
    writeln!(
        out,
        "# summary trials={} rate_bits={} mean_distortion={} se_distortion={} shannon_limit={}",
        records.len(),
        rate_bits,
        mean_d,
        se_d,
        dstar
    )?;
    Ok(())
}

fn run_se(cfg: &ExperimentConfig, out: &mut impl Write) -> Result<(), SimError> {
    let params = channel_params(cfg)?;
    let alloc = build_alloc(cfg.alloc, &params)?;
    let mode = match cfg.se_hard_a {
        Some(a) => SeMode::Hard { a },
        None => SeMode::Soft,
    };
    let traj = se_trajectory(&alloc, &params, mode, cfg.mc_samples, cfg.max_iters, se_seed(cfg.seed));
    writeln!(
        out,
        "# sparc-sim csv v1 scenario=se seed={} l={} m={} n={} mode={}",
        cfg.seed,
        params.l,
        params.m,
        params.n,
        match mode {
            SeMode::Soft => "soft".to_string(),
            SeMode::Hard { a } => format!("hard(a={a})"),
        }
    )?;
    writeln!(out, "t,x,tau_sq")?;
    for (t, (x, tau)) in traj.x.iter().zip(&traj.tau_sq).enumerate() {
        writeln!(out, "{t},{x},{tau}")?;
    }
    writeln!(out, "# summary terminal_iteration={}", traj.terminal_iteration)?;
    Ok(())
}

fn run_alloc(cfg: &ExperimentConfig, out: &mut impl Write) -> Result<(), SimError> {
    let params = channel_params(cfg)?;
    let alloc = build_alloc(cfg.alloc, &params)?;
    writeln!(
        out,
        "# sparc-sim csv v1 scenario=alloc seed={} l={} m={} n={}",
        cfg.seed, params.l, params.m, params.n
    )?;
    writeln!(out, "section,power")?;
    for (i, p) in alloc.values().iter().enumerate() {
        writeln!(out, "{i},{p}")?;
    }
    writeln!(out, "# summary total={} flat_suffix={}", alloc.total(), alloc.flat_suffix_len())?;
    Ok(())
}

fn run_wz(cfg: &ExperimentConfig, out: &mut impl Write) -> Result<(), SimError> {
    let n = cfg.n.ok_or_else(|| SimError::Config("field n: required for wz".into()))?;
    let wz_cfg = WzConfig {
        l: cfg.l,
        m: cfg.m,
        m_prime: cfg.m_prime,
        n,
        source_var: cfg.source_var,
        side_noise_var: cfg.side_noise_var,
        distortion_target: cfg.distortion_target,
        design_seed: design_seed(cfg.seed),
        budget: SearchBudget::default(),
    };

    struct WzRecord {
        trial: usize,
        seed: u64,
        distortion: f64,
        bin_rate_nats: f64,
    }

    let records = collect_trials(cfg, |t, seed| {
        let mut rng = stream_rng(seed, 0);
        let sx = cfg.source_var.sqrt();
        let sz = cfg.side_noise_var.sqrt();
        let x: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal) * sx).collect();
        let y: Vec<f64> =
            x.iter().map(|&xi| xi + rng.sample::<f64, _>(StandardNormal) * sz).collect();
        let out = wz_toy(&wz_cfg, &x, &y).map_err(|e| SimError::from_core(e, t))?;
        Ok(WzRecord { trial: t, seed, distortion: out.distortion, bin_rate_nats: out.bin_rate_nats })
    })?;

    writeln!(
        out,
        "# sparc-sim csv v1 scenario=wz (toy) seed={} trials={} l={} m={} m_prime={} n={}",
        cfg.seed, cfg.trials, cfg.l, cfg.m, cfg.m_prime, n
    )?;
    writeln!(out, "trial,seed,distortion,bin_rate_nats")?;
    for r in &records {
        writeln!(out, "{},{},{},{}", r.trial, r.seed, r.distortion, r.bin_rate_nats)?;
    }
    let (mean_d, se_d) = mean_se(records.iter().map(|r| r.distortion));
    let var_xy = cfg.source_var * cfg.side_noise_var / (cfg.source_var + cfg.side_noise_var);
    writeln!(
        out,
        "# summary trials={} mean_distortion={} se_distortion={} target={} var_x_given_y={}",
        records.len(),
        mean_d,
        se_d,
        cfg.distortion_target,
        var_xy
    )?;
    Ok(())
}

fn run_gp(cfg: &ExperimentConfig, out: &mut impl Write) -> Result<(), SimError> {
    let n = cfg.n.ok_or_else(|| SimError::Config("field n: required for gp".into()))?;
    let gp_cfg = GpConfig {
        l: cfg.l,
        m: cfg.m,
        m_prime: cfg.m_prime,
        n,
        power: cfg.power,
        state_var: cfg.state_var,
        channel_noise_var: cfg.noise_var,
        design_seed: design_seed(cfg.seed),
        budget: SearchBudget::default(),
    };
    let bins = cfg.m / cfg.m_prime.max(1);

    struct GpRecord {
        trial: usize,
        seed: u64,
        correct: bool,
        alpha: f64,
    }

    let records = collect_trials(cfg, |t, seed| {
        let mut rng = stream_rng(seed, 0);
        let w: Vec<usize> = (0..cfg.l).map(|_| rng.random_range(0..bins)).collect();
        let ss = cfg.state_var.sqrt();
        let sz = cfg.noise_var.sqrt();
        let state: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal) * ss).collect();
        let noise: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal) * sz).collect();
        let out = gp_toy(&gp_cfg, &w, &state, &noise).map_err(|e| SimError::from_core(e, t))?;
        Ok(GpRecord { trial: t, seed, correct: out.correct, alpha: out.alpha })
    })?;

    writeln!(
        out,
        "# sparc-sim csv v1 scenario=gp (toy) seed={} trials={} l={} m={} m_prime={} n={} alpha={}",
        cfg.seed,
        cfg.trials,
        cfg.l,
        cfg.m,
        cfg.m_prime,
        n,
        records.first().map(|r| r.alpha).unwrap_or(cfg.power / (cfg.power + cfg.noise_var))
    )?;
    writeln!(out, "trial,seed,correct")?;
    for r in &records {
        writeln!(out, "{},{},{}", r.trial, r.seed, r.correct as u8)?;
    }
    let (err_rate, se_err) = mean_se(records.iter().map(|r| (!r.correct) as u8 as f64));
    writeln!(
        out,
        "# summary trials={} message_error_rate={} se={}",
        records.len(),
        err_rate,
        se_err
    )?;
    Ok(())
}
