//! Code geometry shared by every module.

use crate::error::{Error, Result};
use alloc::format;
#[allow(unused_imports)]
use num_traits::Float;

/// SPARC code parameters.
///
/// The design matrix has `n` rows and `l * m` columns (`l` sections of `m`
/// columns each). Rates are stored in nats throughout; `L ln M = n R` up to
/// the rounding of `n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SparcParams {
    /// Block length (number of channel uses / source samples).
    pub n: usize,
    /// Number of sections.
    pub l: usize,
    /// Columns per section.
    pub m: usize,
    /// Rate in nats per sample.
    pub rate_nats: f64,
    /// Average codeword power per sample.
    pub power: f64,
    /// Channel noise variance.
    pub noise_var: f64,
}

impl SparcParams {
    /// Builds parameters from `(L, M, R)`, deriving the block length as
    /// `n = ceil(L ln M / R)` so the realized rate never exceeds the request.
    pub fn new(l: usize, m: usize, rate_nats: f64, power: f64, noise_var: f64) -> Result<Self> {
        if rate_nats <= 0.0 || !rate_nats.is_finite() {
            return Err(Error::InvalidInput(format!("rate must be positive, got {rate_nats}")));
        }
        let n = (l as f64 * (m as f64).ln() / rate_nats).ceil() as usize;
        Self::with_block_length(n, l, m, rate_nats, power, noise_var)
    }

    /// Builds parameters from `(L, M)` and a rate given in bits.
    pub fn from_bits(l: usize, m: usize, rate_bits: f64, power: f64, noise_var: f64) -> Result<Self> {
        Self::new(l, m, rate_bits * core::f64::consts::LN_2, power, noise_var)
    }

    /// Builds parameters with an explicit block length. The stored rate is
    /// the requested one; `L ln M` must lie within one `R` of `n R`.
    pub fn with_block_length(
        n: usize,
        l: usize,
        m: usize,
        rate_nats: f64,
        power: f64,
        noise_var: f64,
    ) -> Result<Self> {
        if l < 1 || m < 2 {
            return Err(Error::InvalidInput(format!("need L >= 1 and M >= 2, got L={l}, M={m}")));
        }
        if power <= 0.0 || noise_var <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "need P > 0 and noise variance > 0, got P={power}, sigma2={noise_var}"
            )));
        }
        if rate_nats <= 0.0 || !rate_nats.is_finite() {
            return Err(Error::InvalidInput(format!("rate must be positive, got {rate_nats}")));
        }
        if n == 0 {
            return Err(Error::InvalidInput("block length is zero".into()));
        }
        let gap = (l as f64 * (m as f64).ln() - n as f64 * rate_nats).abs();
        if gap > rate_nats * (1.0 + 1e-9) {
            return Err(Error::InvalidInput(format!(
                "inconsistent geometry: |L ln M - n R| = {gap:.6} exceeds R = {rate_nats:.6}"
            )));
        }
        Ok(SparcParams { n, l, m, rate_nats, power, noise_var })
    }

    /// Same as [`with_block_length`](Self::with_block_length) but derives the
    /// rate as `L ln M / n`, for setups that fix the block length.
    pub fn with_exact_rate(n: usize, l: usize, m: usize, power: f64, noise_var: f64) -> Result<Self> {
        let rate = l as f64 * (m as f64).ln() / n as f64;
        Self::with_block_length(n, l, m, rate, power, noise_var)
    }

    /// Signal-to-noise ratio `P / sigma^2`.
    pub fn snr(&self) -> f64 {
        self.power / self.noise_var
    }

    /// AWGN capacity `0.5 ln(1 + snr)` in nats.
    pub fn capacity_nats(&self) -> f64 {
        0.5 * (1.0 + self.snr()).ln()
    }

    /// Rate in bits per sample.
    pub fn rate_bits(&self) -> f64 {
        self.rate_nats / core::f64::consts::LN_2
    }

    /// `log2(M)` when `M` is a power of two.
    pub fn bits_per_section(&self) -> Result<usize> {
        if !self.m.is_power_of_two() {
            return Err(Error::Config(format!(
                "M = {} is not a power of two; the bit codec is undefined",
                self.m
            )));
        }
        Ok(self.m.trailing_zeros() as usize)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn block_length_rounds_up() {
        // L ln M = 2 ln 4 = 2.7726; R = 0.7613 -> n = ceil(3.642) = 4.
        let p = SparcParams::new(2, 4, 0.7613, 1.0, 1.0).unwrap();
        assert_eq!(p.n, 4);
        // Realized rate L ln M / n <= requested rate.
        assert!(p.l as f64 * (p.m as f64).ln() / p.n as f64 <= p.rate_nats);
    }

    #[test]
    fn geometry_identity_within_one_rate_unit() {
        for &(l, m, r) in &[(16usize, 8usize, 0.5f64), (1024, 512, 1.0), (3, 2, 0.01), (1, 2, 0.3)] {
            let p = SparcParams::new(l, m, r, 1.0, 1.0).unwrap();
            let gap = (p.l as f64 * (p.m as f64).ln() - p.n as f64 * p.rate_nats).abs();
            assert!(gap <= p.rate_nats + 1e-12, "gap {gap} > R {r}");
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(SparcParams::new(0, 4, 1.0, 1.0, 1.0).is_err());
        assert!(SparcParams::new(2, 1, 1.0, 1.0, 1.0).is_err());
        assert!(SparcParams::new(2, 4, -1.0, 1.0, 1.0).is_err());
        assert!(SparcParams::new(2, 4, 1.0, 0.0, 1.0).is_err());
        assert!(SparcParams::new(2, 4, 1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn capacity_and_snr() {
        let p = SparcParams::new(8, 4, 0.5, 15.0, 1.0).unwrap();
        assert_eq!(p.snr(), 15.0);
        assert!((p.capacity_nats() - 0.5 * 16f64.ln()).abs() < 1e-15);
    }
}
