//! Analytic single-user bounds, minimal trial counts and error statistics.
//!
//! The bounds assume maximal-ratio combining over Rayleigh branches with
//! pairwise distinct mean SNRs; the partial-fraction weights
//! `p_ℓ = Π_{k≠ℓ} (1 − ν̄_k/ν̄_ℓ)⁻¹` are singular for repeated means, and
//! repeated inputs are rejected rather than regularized so the bound keeps
//! its oracle role.

use crate::{Error, Result};

/// Multiplicative 95% confidence band around a rate estimated from at least
/// [`MIN_RELIABLE_ERRORS`] errors.
pub const CONFIDENCE_BAND: (f64, f64) = (0.823, 1.215);

/// Error count below which a rate estimate is flagged unreliable.
pub const MIN_RELIABLE_ERRORS: u64 = 100;

fn partial_fraction_weights(nus: &[f64]) -> Result<Vec<f64>> {
    for &nu in nus {
        if nu < 0.0 {
            return Err(Error::NegativePathSnr(nu));
        }
    }
    if nus.len() > 1 {
        for (i, &a) in nus.iter().enumerate() {
            for &b in nus.iter().skip(i + 1) {
                if (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0) {
                    return Err(Error::RepeatedPathSnr);
                }
                if a == 0.0 || b == 0.0 {
                    // 1 − ν̄_k/ν̄_ℓ is undefined with a zero mean.
                    return Err(Error::RepeatedPathSnr);
                }
            }
        }
    }
    Ok(nus
        .iter()
        .enumerate()
        .map(|(l, &nu_l)| {
            nus.iter()
                .enumerate()
                .filter(|&(k, _)| k != l)
                .map(|(_, &nu_k)| 1.0 - nu_k / nu_l)
                .product::<f64>()
                .recip()
        })
        .collect())
}

/// Average symbol error rate of a lone M-QAM user over `L` Rayleigh paths
/// with MRC, from the per-path mean SNRs per symbol.
///
/// `SER = 2α·Σ p_ℓ(1−β_ℓ) + α²·[(4/π)·Σ p_ℓ β_ℓ·atan(1/β_ℓ) − Σ p_ℓ]` with
/// `α = 1 − 1/√M`, `g = 3/(2(M−1))` and `β_ℓ = √(ν̄_ℓ g/(1 + ν̄_ℓ g))`.
/// Only square orders 4 and 16 are accepted here; the BPSK floor lives in
/// [`sub_ber_bpsk`].
pub fn sub_ser(order: usize, symbol_snrs: &[f64]) -> Result<f64> {
    if order != 4 && order != 16 {
        return Err(Error::UnsupportedOrder(order));
    }
    let p = partial_fraction_weights(symbol_snrs)?;
    let alpha = 1.0 - 1.0 / (order as f64).sqrt();
    let g = 3.0 / (2.0 * (order as f64 - 1.0));
    let mut linear = 0.0;
    let mut arct = 0.0;
    let mut psum = 0.0;
    for (&nu, &pl) in symbol_snrs.iter().zip(&p) {
        let beta = (nu * g / (1.0 + nu * g)).sqrt();
        linear += pl * (1.0 - beta);
        // β·atan(1/β) → 0 as β → 0 (atan(∞) = π/2).
        arct += pl * beta * (1.0 / beta).atan();
        psum += pl;
    }
    Ok(2.0 * alpha * linear + alpha * alpha * (4.0 / std::f64::consts::PI * arct - psum))
}

/// Average bit error rate of a lone BPSK user over `L` Rayleigh paths with
/// MRC: `P_b = ½·Σ p_ℓ·(1 − √(ν̄_ℓ/(1 + ν̄_ℓ)))`.
pub fn sub_ber_bpsk(bit_snrs: &[f64]) -> Result<f64> {
    let p = partial_fraction_weights(bit_snrs)?;
    Ok(bit_snrs
        .iter()
        .zip(&p)
        .map(|(&nu, &pl)| 0.5 * pl * (1.0 - (nu / (1.0 + nu)).sqrt()))
        .sum())
}

/// Minimal number of symbol decisions so that roughly `n_errors` errors are
/// seen at the target rate: `⌈n_errors / rate⌉`.
pub fn min_trials(target_rate: f64, n_errors: u64) -> Result<u64> {
    if target_rate <= 0.0 || !target_rate.is_finite() {
        return Err(Error::NonPositiveRate(target_rate));
    }
    Ok((n_errors as f64 / target_rate).ceil() as u64)
}

/// Bit/symbol error counters for one detector at one operating point.
///
/// Merging is associative and commutative, so parallel trial shards combine
/// deterministically.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ErrorStats {
    pub bit_errors: u64,
    pub symbol_errors: u64,
    pub trials: u64,
    pub bits_per_trial: usize,
    pub bits_per_symbol: usize,
}

impl ErrorStats {
    pub fn new(bits_per_trial: usize, bits_per_symbol: usize) -> Self {
        assert!(bits_per_symbol > 0 && bits_per_trial % bits_per_symbol == 0);
        Self {
            bit_errors: 0,
            symbol_errors: 0,
            trials: 0,
            bits_per_trial,
            bits_per_symbol,
        }
    }

    /// Adds one trial by comparing decided bits against the truth.
    pub fn accumulate(&mut self, truth: &[u8], decided: &[u8]) -> Result<()> {
        if truth.len() != decided.len() {
            return Err(Error::DimensionMismatch {
                what: "decided bit length",
                expected: truth.len(),
                got: decided.len(),
            });
        }
        if truth.len() != self.bits_per_trial {
            return Err(Error::DimensionMismatch {
                what: "bits per trial",
                expected: self.bits_per_trial,
                got: truth.len(),
            });
        }
        let mut bit_errors = 0u64;
        let mut symbol_errors = 0u64;
        for group in truth
            .chunks_exact(self.bits_per_symbol)
            .zip(decided.chunks_exact(self.bits_per_symbol))
        {
            let diff = group.0.iter().zip(group.1).filter(|(a, b)| a != b).count() as u64;
            bit_errors += diff;
            symbol_errors += u64::from(diff > 0);
        }
        self.record(bit_errors, symbol_errors);
        Ok(())
    }

    /// Adds one trial from pre-counted errors.
    pub fn record(&mut self, bit_errors: u64, symbol_errors: u64) {
        self.bit_errors += bit_errors;
        self.symbol_errors += symbol_errors;
        self.trials += 1;
    }

    /// Combines two shards of the same experiment.
    pub fn merge(&mut self, other: &ErrorStats) -> Result<()> {
        if other.bits_per_trial != self.bits_per_trial
            || other.bits_per_symbol != self.bits_per_symbol
        {
            return Err(Error::DimensionMismatch {
                what: "stats shape",
                expected: self.bits_per_trial,
                got: other.bits_per_trial,
            });
        }
        self.bit_errors += other.bit_errors;
        self.symbol_errors += other.symbol_errors;
        self.trials += other.trials;
        Ok(())
    }

    pub fn total_bits(&self) -> u64 {
        self.trials * self.bits_per_trial as u64
    }

    pub fn total_symbols(&self) -> u64 {
        self.total_bits() / self.bits_per_symbol as u64
    }

    pub fn ber(&self) -> f64 {
        if self.total_bits() == 0 {
            0.0
        } else {
            self.bit_errors as f64 / self.total_bits() as f64
        }
    }

    pub fn ser(&self) -> f64 {
        if self.total_symbols() == 0 {
            0.0
        } else {
            self.symbol_errors as f64 / self.total_symbols() as f64
        }
    }

    /// Whether the BER estimate carries the 95% band.
    pub fn reliable(&self) -> bool {
        self.bit_errors >= MIN_RELIABLE_ERRORS
    }

    /// Multiplicative 95% band around the BER, when reliable.
    pub fn confidence(&self) -> Option<(f64, f64)> {
        self.reliable()
            .then(|| (CONFIDENCE_BAND.0 * self.ber(), CONFIDENCE_BAND.1 * self.ber()))
    }
}
