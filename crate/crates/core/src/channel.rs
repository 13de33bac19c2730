//! Rayleigh fading channels: power-delay profiles, per-trial realizations and
//! the multiplicative estimation error model.
//!
//! Gains are Rayleigh (`γ = sqrt(E/2 · (g₁² + g₂²))` with standard normal
//! `g`), phases are uniform on `[0, 2π)`, and every coefficient is drawn
//! independently across antennas, users and paths. Slow fading holds the
//! coefficients constant over the whole detection window; a per-symbol mode
//! redraws them each symbol for convergence studies.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use crate::{Error, Result};

/// Mean energy per resolvable path and its chip delay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerDelayProfile {
    delays: Vec<usize>,
    energies: Vec<f64>,
}

impl PowerDelayProfile {
    /// Validates and builds a custom profile.
    ///
    /// Delays are in chips, strictly increasing and starting at zero; mean
    /// energies are positive and sum to one so total received energy is
    /// profile-independent.
    pub fn new(delays: Vec<usize>, energies: Vec<f64>) -> Result<Self> {
        if delays.is_empty() || delays.len() != energies.len() {
            return Err(Error::InvalidProfile(format!(
                "need matching non-empty delay/energy lists, got {} and {}",
                delays.len(),
                energies.len()
            )));
        }
        if delays[0] != 0 {
            return Err(Error::InvalidProfile("first path delay must be 0".into()));
        }
        if delays.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidProfile(
                "path delays must be strictly increasing".into(),
            ));
        }
        if energies.iter().any(|&e| e <= 0.0) {
            return Err(Error::InvalidProfile(
                "path energies must be positive".into(),
            ));
        }
        let sum: f64 = energies.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidProfile(format!(
                "path energies sum to {sum}, expected 1"
            )));
        }
        Ok(Self { delays, energies })
    }

    /// Single-path (flat) profile.
    pub fn pd1() -> Self {
        Self::new(vec![0], vec![1.0]).expect("pd1 is valid")
    }

    /// Two-path exponential profile.
    pub fn pd2() -> Self {
        Self::new(vec![0, 1], vec![0.8320, 0.1680]).expect("pd2 is valid")
    }

    /// Three-path exponential profile.
    pub fn pd3() -> Self {
        Self::new(vec![0, 1, 2], vec![0.8047, 0.1625, 0.0328]).expect("pd3 is valid")
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "pd1" => Ok(Self::pd1()),
            "pd2" => Ok(Self::pd2()),
            "pd3" => Ok(Self::pd3()),
            _ => Err(Error::InvalidConfig(format!(
                "unknown power-delay profile {name:?} (expected pd1, pd2 or pd3)"
            ))),
        }
    }

    pub fn path_count(&self) -> usize {
        self.delays.len()
    }

    pub fn delays(&self) -> &[usize] {
        &self.delays
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn max_delay(&self) -> usize {
        *self.delays.last().expect("profile is non-empty")
    }
}

/// Whether coefficients stay constant over the detection window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FadingMode {
    Slow,
    PerSymbol,
}

/// Delay model for the user population.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Timing {
    /// All delays forced to zero.
    Synchronous,
    /// Chip-synchronous, symbol-asynchronous: each user draws a symbol delay
    /// uniformly over `{0, …, gain - 1 - max_path_delay}` chips so every
    /// total delay stays below one symbol; path delays add the profile
    /// offsets. With `per_antenna`, symbol delays are drawn independently
    /// per receive antenna instead of being common to all of them.
    Asynchronous { gain: usize, per_antenna: bool },
}

/// One draw of the fading process for a whole trial.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    antennas: usize,
    users: usize,
    paths: usize,
    symbols: usize,
    /// Complex coefficients indexed by `((q·K + k)·L + l)·I + i`.
    coeffs: Vec<Complex64>,
    /// Total chip delays indexed by `(q·K + k)·L + l`.
    delays: Vec<usize>,
}

impl ChannelRealization {
    fn cidx(&self, q: usize, k: usize, l: usize, i: usize) -> usize {
        (((q * self.users) + k) * self.paths + l) * self.symbols + i
    }

    fn didx(&self, q: usize, k: usize, l: usize) -> usize {
        (q * self.users + k) * self.paths + l
    }

    pub fn coeff(&self, q: usize, k: usize, l: usize, i: usize) -> Complex64 {
        self.coeffs[self.cidx(q, k, l, i)]
    }

    pub fn delay(&self, q: usize, k: usize, l: usize) -> usize {
        self.delays[self.didx(q, k, l)]
    }

    pub fn max_delay(&self) -> usize {
        self.delays.iter().copied().max().unwrap_or(0)
    }

    pub fn antennas(&self) -> usize {
        self.antennas
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn paths(&self) -> usize {
        self.paths
    }

    pub fn symbols(&self) -> usize {
        self.symbols
    }

    /// Deterministic AWGN special case: unit gains, zero phases, zero delays.
    pub fn unit_gain(users: usize, symbols: usize, antennas: usize, paths: usize) -> Self {
        Self {
            antennas,
            users,
            paths,
            symbols,
            coeffs: vec![Complex64::new(1.0, 0.0); antennas * users * paths * symbols],
            delays: vec![0; antennas * users * paths],
        }
    }
}

/// Draws a fading realization.
///
/// Draw order is fixed for reproducibility: symbol delays first (per user,
/// or per antenna and user when delays are antenna-specific), then
/// coefficients in `(q, k, l)` order with one gain/phase pair per symbol in
/// per-symbol mode and a single shared pair in slow mode.
pub fn draw_channel(
    profile: &PowerDelayProfile,
    users: usize,
    symbols: usize,
    antennas: usize,
    fading: FadingMode,
    timing: Timing,
    rng: &mut impl Rng,
) -> ChannelRealization {
    assert!(users >= 1 && symbols >= 1 && antennas >= 1);
    let paths = profile.path_count();
    let mut out = ChannelRealization {
        antennas,
        users,
        paths,
        symbols,
        coeffs: vec![Complex64::default(); antennas * users * paths * symbols],
        delays: vec![0; antennas * users * paths],
    };

    match timing {
        Timing::Synchronous => {}
        Timing::Asynchronous { gain, per_antenna } => {
            assert!(
                gain > profile.max_delay(),
                "processing gain {gain} must exceed the profile delay spread {}",
                profile.max_delay()
            );
            let span = gain - profile.max_delay();
            let mut base = vec![0usize; antennas * users];
            if per_antenna {
                for slot in base.iter_mut() {
                    *slot = rng.random_range(0..span);
                }
            } else {
                for k in 0..users {
                    let d = rng.random_range(0..span);
                    for q in 0..antennas {
                        base[q * users + k] = d;
                    }
                }
            }
            for q in 0..antennas {
                for k in 0..users {
                    for l in 0..paths {
                        let idx = out.didx(q, k, l);
                        out.delays[idx] = base[q * users + k] + profile.delays[l];
                    }
                }
            }
        }
    }

    let normal = Normal::new(0.0, 1.0).expect("unit normal is valid");
    for q in 0..antennas {
        for k in 0..users {
            for l in 0..paths {
                let scale = (profile.energies[l] / 2.0).sqrt();
                let draws = match fading {
                    FadingMode::Slow => 1,
                    FadingMode::PerSymbol => symbols,
                };
                for d in 0..draws {
                    let g1: f64 = normal.sample(rng);
                    let g2: f64 = normal.sample(rng);
                    let gamma = scale * (g1 * g1 + g2 * g2).sqrt();
                    let theta = rng.random::<f64>() * TAU;
                    let h = Complex64::from_polar(gamma, theta);
                    match fading {
                        FadingMode::Slow => {
                            for i in 0..symbols {
                                let idx = out.cidx(q, k, l, i);
                                out.coeffs[idx] = h;
                            }
                        }
                        FadingMode::PerSymbol => {
                            let idx = out.cidx(q, k, l, d);
                            out.coeffs[idx] = h;
                        }
                    }
                }
            }
        }
    }
    out
}

/// Channel state information handed to the receiver.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelEstimate {
    channel: ChannelRealization,
    eps_gamma: f64,
    eps_theta: f64,
}

impl ChannelEstimate {
    /// Error-free estimate equal to the truth.
    pub fn perfect(truth: &ChannelRealization) -> Self {
        Self {
            channel: truth.clone(),
            eps_gamma: 0.0,
            eps_theta: 0.0,
        }
    }

    pub fn coeff(&self, q: usize, k: usize, l: usize, i: usize) -> Complex64 {
        self.channel.coeff(q, k, l, i)
    }

    pub fn delay(&self, q: usize, k: usize, l: usize) -> usize {
        self.channel.delay(q, k, l)
    }

    pub fn channel(&self) -> &ChannelRealization {
        &self.channel
    }

    pub fn error_bounds(&self) -> (f64, f64) {
        (self.eps_gamma, self.eps_theta)
    }
}

/// Corrupts a realization with multiplicative uniform errors.
///
/// `γ̂ = U[1−ε_γ, 1+ε_γ]·γ` and `θ̂ = U[1−ε_θ, 1+ε_θ]·θ`, drawn independently
/// per coefficient, with the phase taken in `[0, 2π)`. The multiplicative
/// phase error is applied literally, so phases near zero receive almost no
/// error while phases near `2π` receive the largest ones. Delays carry over
/// unchanged.
pub fn corrupt_estimate(
    truth: &ChannelRealization,
    eps_gamma: f64,
    eps_theta: f64,
    rng: &mut impl Rng,
) -> Result<ChannelEstimate> {
    for eps in [eps_gamma, eps_theta] {
        if !(0.0..1.0).contains(&eps) {
            return Err(Error::ErrorBoundOutOfRange(eps));
        }
    }
    let mut channel = truth.clone();
    if eps_gamma > 0.0 || eps_theta > 0.0 {
        for h in channel.coeffs.iter_mut() {
            let gamma = h.norm();
            let mut theta = h.arg();
            if theta < 0.0 {
                theta += TAU;
            }
            let fg = if eps_gamma > 0.0 {
                1.0 - eps_gamma + 2.0 * eps_gamma * rng.random::<f64>()
            } else {
                1.0
            };
            let ft = if eps_theta > 0.0 {
                1.0 - eps_theta + 2.0 * eps_theta * rng.random::<f64>()
            } else {
                1.0
            };
            *h = Complex64::from_polar(fg * gamma, ft * theta);
        }
    }
    Ok(ChannelEstimate {
        channel,
        eps_gamma,
        eps_theta,
    })
}
