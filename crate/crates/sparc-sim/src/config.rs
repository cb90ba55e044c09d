//! Experiment configuration: a flat `key = value` text format with `#`
//! comments. Rates accept a `bits` or `nats` suffix; bare numbers are bits.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

/// A rate with explicit units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateSpec {
    pub nats: f64,
}

impl RateSpec {
    pub fn from_bits(bits: f64) -> Self {
        RateSpec { nats: bits * std::f64::consts::LN_2 }
    }

    pub fn bits(&self) -> f64 {
        self.nats / std::f64::consts::LN_2
    }
}

impl FromStr for RateSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        let (num, unit) = match t.strip_suffix("nats") {
            Some(rest) => (rest, "nats"),
            None => match t.strip_suffix("bits") {
                Some(rest) => (rest, "bits"),
                None => (t, "bits"),
            },
        };
        let value: f64 = num
            .trim()
            .parse()
            .map_err(|_| format!("cannot parse rate from {s:?}"))?;
        if !value.is_finite() || value <= 0.0 {
            return Err(format!("rate must be positive and finite, got {s:?}"));
        }
        Ok(match unit {
            "nats" => RateSpec { nats: value },
            _ => RateSpec::from_bits(value),
        })
    }
}

/// Power allocation choice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AllocScheme {
    Flat,
    Exponential,
    Modified { a: f64, f: f64 },
    /// `blocks = 0` means `B = L`; `r_pa = None` defaults to the code rate.
    Iterative { blocks: usize, r_pa: Option<RateSpec> },
}

/// Design matrix choice.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DesignChoice {
    Gaussian,
    Bernoulli,
    Hadamard,
}

impl DesignChoice {
    pub fn kind(self) -> sparc_core::design::DesignKind {
        match self {
            DesignChoice::Gaussian => sparc_core::design::DesignKind::Gaussian,
            DesignChoice::Bernoulli => sparc_core::design::DesignKind::Bernoulli,
            DesignChoice::Hadamard => sparc_core::design::DesignKind::Hadamard,
        }
    }
}

/// What an experiment simulates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    Channel,
    ScChannel,
    Broadcast,
    Mac,
    Compress,
    Se,
    Alloc,
    Wz,
    Gp,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::Channel => "channel",
            Scenario::ScChannel => "sc-channel",
            Scenario::Broadcast => "bc",
            Scenario::Mac => "mac",
            Scenario::Compress => "compress",
            Scenario::Se => "se",
            Scenario::Alloc => "alloc",
            Scenario::Wz => "wz",
            Scenario::Gp => "gp",
        }
    }
}

/// A parsed experiment description. Field meaning depends on the scenario;
/// validation happens when the runner assembles the code.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub seed: u64,
    pub trials: usize,
    pub workers: usize,
    pub out: Option<String>,

    // Code geometry.
    pub l: usize,
    pub m: usize,
    pub n: Option<usize>,
    pub rate: Option<RateSpec>,
    pub power: f64,
    pub noise_var: f64,
    pub snr: Option<f64>,

    pub alloc: AllocScheme,
    pub design: DesignChoice,
    pub max_iters: usize,
    pub mc_samples: usize,

    // Spatial coupling.
    pub omega: usize,
    pub lambda: usize,

    // State evolution.
    pub se_hard_a: Option<f64>,

    // Multiuser.
    pub sigma1_sq: f64,
    pub sigma2_sq: f64,
    pub p1: f64,
    pub p2: f64,
    pub alpha: f64,
    pub gamma: f64,

    // Compression.
    pub b_exponent: f64,
    pub min_distance: bool,
    pub source_file: Option<String>,

    // Side information toys.
    pub m_prime: usize,
    pub source_var: f64,
    pub side_noise_var: f64,
    pub distortion_target: f64,
    pub state_var: f64,
}

impl ExperimentConfig {
    /// Baseline values; scenario-specific keys overwrite these.
    pub fn defaults(scenario: Scenario) -> Self {
        ExperimentConfig {
            scenario,
            seed: 0,
            trials: 1,
            workers: 1,
            out: None,
            l: 32,
            m: 16,
            n: None,
            rate: None,
            power: 15.0,
            noise_var: 1.0,
            snr: None,
            alloc: AllocScheme::Iterative { blocks: 0, r_pa: None },
            design: DesignChoice::Hadamard,
            max_iters: 64,
            mc_samples: 1000,
            omega: 6,
            lambda: 32,
            se_hard_a: None,
            sigma1_sq: 1.0,
            sigma2_sq: 2.0,
            p1: 15.0,
            p2: 15.0,
            alpha: 0.5,
            gamma: 0.8,
            b_exponent: 2.0,
            min_distance: true,
            source_file: None,
            m_prime: 2,
            source_var: 1.0,
            side_noise_var: 0.5,
            distortion_target: 0.1,
            state_var: 1.0,
        }
    }

    /// Parses `key = value` lines. Unknown keys are rejected so typos fail
    /// loudly; every error names the offending field.
    pub fn parse(scenario: Scenario, text: &str) -> Result<Self, String> {
        let mut cfg = Self::defaults(scenario);
        let mut map = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| format!("line {}: expected key = value, got {raw:?}", lineno + 1))?;
            map.insert(key.trim().to_string(), value.trim().to_string());
        }
        for (key, value) in map {
            cfg.set(&key, &value)?;
        }
        Ok(cfg)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        fn num<T: FromStr>(key: &str, value: &str) -> Result<T, String>
        where
            T::Err: fmt::Display,
        {
            value.parse().map_err(|e| format!("field {key}: {e} (got {value:?})"))
        }
        match key {
            "seed" => self.seed = num(key, value)?,
            "trials" => self.trials = num(key, value)?,
            "workers" => self.workers = num(key, value)?,
            "out" => self.out = Some(value.to_string()),
            "l" => self.l = num(key, value)?,
            "m" => self.m = num(key, value)?,
            "n" => self.n = Some(num(key, value)?),
            "rate" => self.rate = Some(value.parse::<RateSpec>().map_err(|e| format!("field rate: {e}"))?),
            "power" => self.power = num(key, value)?,
            "noise_var" => self.noise_var = num(key, value)?,
            "snr" => self.snr = Some(num(key, value)?),
            "alloc" => {
                self.alloc = match value {
                    "flat" => AllocScheme::Flat,
                    "exponential" => AllocScheme::Exponential,
                    "modified" => AllocScheme::Modified { a: 1.0, f: 1.0 },
                    "iterative" => AllocScheme::Iterative { blocks: 0, r_pa: None },
                    other => return Err(format!("field alloc: unknown scheme {other:?}")),
                }
            }
            "alloc_a" => {
                if let AllocScheme::Modified { a, .. } = &mut self.alloc {
                    *a = num(key, value)?;
                } else {
                    return Err("field alloc_a: only valid with alloc = modified".into());
                }
            }
            "alloc_f" => {
                if let AllocScheme::Modified { f, .. } = &mut self.alloc {
                    *f = num(key, value)?;
                } else {
                    return Err("field alloc_f: only valid with alloc = modified".into());
                }
            }
            "alloc_blocks" => {
                if let AllocScheme::Iterative { blocks, .. } = &mut self.alloc {
                    *blocks = num(key, value)?;
                } else {
                    return Err("field alloc_blocks: only valid with alloc = iterative".into());
                }
            }
            "alloc_rpa" => {
                if let AllocScheme::Iterative { r_pa, .. } = &mut self.alloc {
                    *r_pa =
                        Some(value.parse::<RateSpec>().map_err(|e| format!("field alloc_rpa: {e}"))?);
                } else {
                    return Err("field alloc_rpa: only valid with alloc = iterative".into());
                }
            }
            "design" => {
                self.design = match value {
                    "gaussian" => DesignChoice::Gaussian,
                    "bernoulli" => DesignChoice::Bernoulli,
                    "hadamard" => DesignChoice::Hadamard,
                    other => return Err(format!("field design: unknown kind {other:?}")),
                }
            }
            "max_iters" => self.max_iters = num(key, value)?,
            "mc_samples" => self.mc_samples = num(key, value)?,
            "omega" => self.omega = num(key, value)?,
            "lambda" => self.lambda = num(key, value)?,
            "se_hard_a" => self.se_hard_a = Some(num(key, value)?),
            "sigma1_sq" => self.sigma1_sq = num(key, value)?,
            "sigma2_sq" => self.sigma2_sq = num(key, value)?,
            "p1" => self.p1 = num(key, value)?,
            "p2" => self.p2 = num(key, value)?,
            "alpha" => self.alpha = num(key, value)?,
            "gamma" => self.gamma = num(key, value)?,
            "b" => self.b_exponent = num(key, value)?,
            "rule" => {
                self.min_distance = match value {
                    "mindist" | "min_distance" => true,
                    "correlation" => false,
                    other => return Err(format!("field rule: unknown rule {other:?}")),
                }
            }
            "source_file" => self.source_file = Some(value.to_string()),
            "m_prime" => self.m_prime = num(key, value)?,
            "source_var" => self.source_var = num(key, value)?,
            "side_noise_var" => self.side_noise_var = num(key, value)?,
            "distortion_target" => self.distortion_target = num(key, value)?,
            "state_var" => self.state_var = num(key, value)?,
            other => return Err(format!("unknown configuration field {other:?}")),
        }
        Ok(())
    }

    /// `(P, sigma^2)` after resolving an `snr` shortcut: with `snr` given,
    /// the noise variance stays and the power becomes `snr * noise_var`.
    pub fn power_noise(&self) -> (f64, f64) {
        match self.snr {
            Some(snr) => (snr * self.noise_var, self.noise_var),
            None => (self.power, self.noise_var),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rate_suffixes() {
        assert!((RateSpec::from_str("1.5").unwrap().bits() - 1.5).abs() < 1e-15);
        assert!((RateSpec::from_str("1.5 bits").unwrap().bits() - 1.5).abs() < 1e-15);
        assert!((RateSpec::from_str("0.97 nats").unwrap().nats - 0.97).abs() < 1e-15);
        assert!(RateSpec::from_str("-1").is_err());
        assert!(RateSpec::from_str("abc").is_err());
    }

    #[test]
    fn parses_and_rejects_unknown_fields() {
        let cfg = ExperimentConfig::parse(
            Scenario::Channel,
            "l = 1024\nm = 512 # columns\nrate = 1.5 bits\nsnr = 15\n\n# comment\ntrials = 10\n",
        )
        .unwrap();
        assert_eq!(cfg.l, 1024);
        assert_eq!(cfg.m, 512);
        assert_eq!(cfg.trials, 10);
        assert!((cfg.rate.unwrap().bits() - 1.5).abs() < 1e-15);
        let (p, nv) = cfg.power_noise();
        assert_eq!((p, nv), (15.0, 1.0));

        let err = ExperimentConfig::parse(Scenario::Channel, "bogus = 3").unwrap_err();
        assert!(err.contains("bogus"), "{err}");
    }

    #[test]
    fn alloc_parameter_fields_require_matching_scheme() {
        let err =
            ExperimentConfig::parse(Scenario::Channel, "alloc = flat\nalloc_a = 0.5").unwrap_err();
        assert!(err.contains("alloc_a"), "{err}");
        let cfg = ExperimentConfig::parse(
            Scenario::Channel,
            "alloc = modified\nalloc_a = 0.7\nalloc_f = 0.6",
        )
        .unwrap();
        assert_eq!(cfg.alloc, AllocScheme::Modified { a: 0.7, f: 0.6 });
    }
}
