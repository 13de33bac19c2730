//! Chip-level uplink: spreading sequences, received-signal synthesis,
//! matched-filter despreading, MRC combining, the conventional decision and
//! the cross-correlation structures the joint detectors need.
//!
//! Conventions, frozen here and validated by the analytic single-user bound:
//! the chip interval is the time unit (`T_c = 1`, one sample per chip), the
//! transmitted chip stream carries `A_k · d_k · h · a_k(n)/√N` per chip so a
//! symbol waveform has unit energy, chip noise is complex Gaussian with
//! per-real-dimension variance `N0/2`, and despreading correlates with
//! `a_k(n)/√N`. A branch output is then exactly
//! `y = A·h·d + (ρ-weighted interference) + noise` with post-despreading
//! noise variance `N0/2` per real dimension.
//!
//! Despread branches, and every vector or matrix over them, use one fixed
//! layout: index `a = (i·K + k)·D + l` — path-major within user, user-major
//! within symbol, symbol-major overall.

use ndarray::Array2;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::channel::{ChannelEstimate, ChannelRealization};
use crate::modem::Constellation;
use crate::{Error, Result};

/// Binary spreading sequences for all users.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpreadingSet {
    users: usize,
    gain: usize,
    /// ±1 chips indexed by `k·N + n`.
    chips: Vec<i8>,
}

impl SpreadingSet {
    /// Wraps explicit ±1 chips, for deterministic sequence choices.
    pub fn from_chips(users: usize, gain: usize, chips: Vec<i8>) -> Result<Self> {
        if chips.len() != users * gain {
            return Err(Error::DimensionMismatch {
                what: "chip vector length",
                expected: users * gain,
                got: chips.len(),
            });
        }
        if chips.iter().any(|&c| c != 1 && c != -1) {
            return Err(Error::InvalidConfig("chips must be ±1".into()));
        }
        Ok(Self { users, gain, chips })
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn gain(&self) -> usize {
        self.gain
    }

    pub fn chip(&self, k: usize, n: usize) -> f64 {
        self.chips[k * self.gain + n] as f64
    }

    pub fn chips_of(&self, k: usize) -> &[i8] {
        &self.chips[k * self.gain..(k + 1) * self.gain]
    }
}

/// Draws i.i.d. equiprobable ±1 chips for every user.
pub fn generate_sequences(users: usize, gain: usize, rng: &mut impl Rng) -> SpreadingSet {
    let chips = (0..users * gain)
        .map(|_| if rng.random::<bool>() { 1 } else { -1 })
        .collect();
    SpreadingSet { users, gain, chips }
}

/// Chip-rate samples of the received base-band signal, one row per antenna.
#[derive(Debug, Clone, PartialEq)]
pub struct ChipStream {
    antennas: usize,
    len: usize,
    data: Vec<Complex64>,
}

impl ChipStream {
    pub fn zeros(antennas: usize, len: usize) -> Self {
        Self {
            antennas,
            len,
            data: vec![Complex64::default(); antennas * len],
        }
    }

    pub fn antennas(&self) -> usize {
        self.antennas
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn samples(&self, q: usize) -> &[Complex64] {
        &self.data[q * self.len..(q + 1) * self.len]
    }

    fn samples_mut(&mut self, q: usize) -> &mut [Complex64] {
        &mut self.data[q * self.len..(q + 1) * self.len]
    }

    /// Element-wise sum, for superposition checks.
    pub fn add(&self, other: &ChipStream) -> Result<ChipStream> {
        if self.antennas != other.antennas || self.len != other.len {
            return Err(Error::DimensionMismatch {
                what: "chip stream length",
                expected: self.data.len(),
                got: other.data.len(),
            });
        }
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(out)
    }
}

/// Synthesizes the received chip stream for `I` symbols of `K` users.
///
/// `symbols` is the (users × symbols) matrix of scaled constellation points,
/// `amplitudes[k] = √E_sk`, and `noise_psd` is `N0` (zero disables noise).
/// The stream covers the detection window plus the maximum delay spill.
/// Noise is drawn after the signal, in (antenna, sample) order.
pub fn synthesize_received(
    symbols: &Array2<Complex64>,
    amplitudes: &[f64],
    ch: &ChannelRealization,
    s: &SpreadingSet,
    noise_psd: f64,
    rng: &mut impl Rng,
) -> Result<ChipStream> {
    let users = s.users();
    let gain = s.gain();
    let count = ch.symbols();
    if ch.users() != users {
        return Err(Error::DimensionMismatch {
            what: "channel users",
            expected: users,
            got: ch.users(),
        });
    }
    if symbols.nrows() != users || symbols.ncols() != count {
        return Err(Error::DimensionMismatch {
            what: "symbol matrix size",
            expected: users * count,
            got: symbols.len(),
        });
    }
    if amplitudes.len() != users {
        return Err(Error::DimensionMismatch {
            what: "amplitude count",
            expected: users,
            got: amplitudes.len(),
        });
    }

    let len = count * gain + ch.max_delay();
    let mut stream = ChipStream::zeros(ch.antennas(), len);
    let inv_sqrt_n = 1.0 / (gain as f64).sqrt();
    for q in 0..ch.antennas() {
        let row = stream.samples_mut(q);
        for i in 0..count {
            for k in 0..users {
                for l in 0..ch.paths() {
                    let weight = amplitudes[k] * symbols[[k, i]] * ch.coeff(q, k, l, i);
                    let base = i * gain + ch.delay(q, k, l);
                    for n in 0..gain {
                        row[base + n] += weight * (s.chip(k, n) * inv_sqrt_n);
                    }
                }
            }
        }
    }
    if noise_psd > 0.0 {
        let sigma = (noise_psd / 2.0).sqrt();
        let normal = Normal::new(0.0, sigma).expect("noise sigma is finite");
        for z in stream.data.iter_mut() {
            *z += Complex64::new(normal.sample(rng), normal.sample(rng));
        }
    }
    Ok(stream)
}

/// Matched-filter bank outputs for every (symbol, user, finger) branch.
#[derive(Debug, Clone, PartialEq)]
pub struct DespreadObservation {
    antennas: usize,
    users: usize,
    symbols: usize,
    fingers: usize,
    /// Per antenna, branch-ordered despread outputs.
    y: Vec<Vec<Complex64>>,
}

impl DespreadObservation {
    pub fn antennas(&self) -> usize {
        self.antennas
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn symbols(&self) -> usize {
        self.symbols
    }

    pub fn fingers(&self) -> usize {
        self.fingers
    }

    /// Number of branches per antenna (`K·I·D`).
    pub fn branch_count(&self) -> usize {
        self.users * self.symbols * self.fingers
    }

    pub fn vector(&self, q: usize) -> &[Complex64] {
        &self.y[q]
    }

    pub fn branch(&self, q: usize, i: usize, k: usize, l: usize) -> Complex64 {
        self.y[q][(i * self.users + k) * self.fingers + l]
    }

    /// Stacked `[Re{y}; Im{y}]` form of one antenna's branch vector.
    pub fn real_form(&self, q: usize) -> Vec<f64> {
        let v = &self.y[q];
        let mut out = Vec::with_capacity(2 * v.len());
        out.extend(v.iter().map(|z| z.re));
        out.extend(v.iter().map(|z| z.im));
        out
    }

    /// Element-wise difference, for linearity checks.
    pub fn sub(&self, other: &DespreadObservation) -> Result<DespreadObservation> {
        if self.branch_count() != other.branch_count() || self.antennas != other.antennas {
            return Err(Error::DimensionMismatch {
                what: "observation size",
                expected: self.branch_count(),
                got: other.branch_count(),
            });
        }
        let mut out = self.clone();
        for (a, b) in out.y.iter_mut().zip(&other.y) {
            for (x, y) in a.iter_mut().zip(b) {
                *x -= y;
            }
        }
        Ok(out)
    }
}

/// Despreads a chip stream with `fingers ≤ L` Rake branches per user.
///
/// Branch `(i, k, l)` correlates the stream window starting at
/// `i·N + τ_{q,k,l}` against user k's normalized chips.
pub fn despread(
    r: &ChipStream,
    s: &SpreadingSet,
    ch: &ChannelRealization,
    fingers: usize,
) -> Result<DespreadObservation> {
    if fingers > ch.paths() {
        return Err(Error::TooManyFingers {
            fingers,
            paths: ch.paths(),
        });
    }
    if r.antennas() != ch.antennas() {
        return Err(Error::DimensionMismatch {
            what: "antenna count",
            expected: ch.antennas(),
            got: r.antennas(),
        });
    }
    let users = s.users();
    let gain = s.gain();
    let count = ch.symbols();
    let needed = (count - 1) * gain + ch.max_delay() + gain;
    if r.len() < needed {
        return Err(Error::DimensionMismatch {
            what: "chip stream length",
            expected: needed,
            got: r.len(),
        });
    }
    let inv_sqrt_n = 1.0 / (gain as f64).sqrt();
    let mut y = Vec::with_capacity(ch.antennas());
    for q in 0..ch.antennas() {
        let row = r.samples(q);
        let mut v = Vec::with_capacity(users * count * fingers);
        for i in 0..count {
            for k in 0..users {
                for l in 0..fingers {
                    let start = i * gain + ch.delay(q, k, l);
                    let mut acc = Complex64::default();
                    for n in 0..gain {
                        acc += row[start + n] * s.chip(k, n);
                    }
                    v.push(acc * inv_sqrt_n);
                }
            }
        }
        y.push(v);
    }
    Ok(DespreadObservation {
        antennas: ch.antennas(),
        users,
        symbols: count,
        fingers,
        y,
    })
}

/// Normalized overlap of user k's chips with user u's chips shifted by
/// `shift`: `(1/N)·Σ a_k(n)·a_u(n+shift)` over the in-window samples.
fn partial_rho(s: &SpreadingSet, k: usize, u: usize, shift: isize) -> f64 {
    let n = s.gain() as isize;
    let lo = 0.max(-shift);
    let hi = n.min(n - shift);
    let mut acc = 0i64;
    for j in lo..hi {
        acc += (s.chips_of(k)[j as usize] * s.chips_of(u)[(j + shift) as usize]) as i64;
    }
    acc as f64 / s.gain() as f64
}

/// Cross-correlation sub-matrices and the assembled one-shot matrix.
///
/// `r0` holds same-symbol correlations and `r1` the previous-symbol partial
/// correlations, both over the `K·D` branch grid with index
/// `a = k·D + l`. `full` is the block-tridiagonal block-Toeplitz `K·I·D`
/// matrix with `r0` on the diagonal, `r1` on the sub-diagonal and `r1ᵀ` on
/// the super-diagonal. Its real extension is block-diag(full, full) and is
/// never materialized.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationStructure {
    pub r0: Array2<f64>,
    pub r1: Array2<f64>,
    pub full: Array2<f64>,
}

/// Computes the correlation structure for one antenna from chip-aligned
/// delays. All entries are exact normalized chip-overlap sums under the
/// rectangular pulse.
pub fn compute_correlations(
    s: &SpreadingSet,
    ch: &ChannelRealization,
    fingers: usize,
    antenna: usize,
) -> Result<CorrelationStructure> {
    if fingers > ch.paths() {
        return Err(Error::TooManyFingers {
            fingers,
            paths: ch.paths(),
        });
    }
    if ch.users() != s.users() {
        return Err(Error::DimensionMismatch {
            what: "channel users",
            expected: s.users(),
            got: ch.users(),
        });
    }
    let users = s.users();
    let gain = s.gain() as isize;
    let count = ch.symbols();
    let kd = users * fingers;

    let tau = |k: usize, l: usize| ch.delay(antenna, k, l) as isize;
    let mut r0 = Array2::zeros((kd, kd));
    let mut r1 = Array2::zeros((kd, kd));
    for k in 0..users {
        for l in 0..fingers {
            let a = k * fingers + l;
            for u in 0..users {
                for d in 0..fingers {
                    let b = u * fingers + d;
                    let delta = tau(k, l) - tau(u, d);
                    r0[[a, b]] = partial_rho(s, k, u, delta);
                    // Overlap with user u's previous symbol; empty unless
                    // τ_a < τ_b.
                    r1[[a, b]] = partial_rho(s, k, u, gain + delta);
                }
            }
        }
    }

    let kid = kd * count;
    let mut full = Array2::zeros((kid, kid));
    for bi in 0..count {
        for bj in 0..count {
            let block = if bi == bj {
                &r0
            } else if bi == bj + 1 {
                &r1
            } else if bj == bi + 1 {
                // r1ᵀ on the super-diagonal.
                for a in 0..kd {
                    for b in 0..kd {
                        full[[bi * kd + a, bj * kd + b]] = r1[[b, a]];
                    }
                }
                continue;
            } else {
                continue;
            };
            for a in 0..kd {
                for b in 0..kd {
                    full[[bi * kd + a, bj * kd + b]] = block[[a, b]];
                }
            }
        }
    }
    Ok(CorrelationStructure { r0, r1, full })
}

/// Maximal-ratio combining of the Rake branches into per-(user, symbol)
/// complex decision variables `ζ`.
pub fn mrc_combine(
    obs: &DespreadObservation,
    est: &ChannelEstimate,
) -> Result<Array2<Complex64>> {
    let ch = est.channel();
    if ch.users() != obs.users()
        || ch.antennas() != obs.antennas()
        || ch.symbols() != obs.symbols()
        || ch.paths() < obs.fingers()
    {
        return Err(Error::DimensionMismatch {
            what: "estimate shape",
            expected: obs.branch_count() * obs.antennas(),
            got: ch.users() * ch.symbols() * ch.paths() * ch.antennas(),
        });
    }
    let mut zeta = Array2::default((obs.users(), obs.symbols()));
    for i in 0..obs.symbols() {
        for k in 0..obs.users() {
            let mut acc = Complex64::default();
            for q in 0..obs.antennas() {
                for l in 0..obs.fingers() {
                    acc += obs.branch(q, i, k, l) * est.coeff(q, k, l, i).conj();
                }
            }
            zeta[[k, i]] = acc;
        }
    }
    Ok(zeta)
}

/// Conventional (Rake) decision: scales `ζ` by the combining gain
/// `A_k · Σ_{q,l} γ̂²` and quantizes each axis to the nearest alphabet level.
///
/// Returns the decided symbol matrix and the bit vector in symbol-major
/// order (all users of symbol 0, then symbol 1, …), which is the layout the
/// joint detectors use.
pub fn conventional_decide(
    zeta: &Array2<Complex64>,
    est: &ChannelEstimate,
    amplitudes: &[f64],
    fingers: usize,
    c: &Constellation,
) -> Result<(Array2<Complex64>, Vec<u8>)> {
    let (users, count) = zeta.dim();
    if amplitudes.len() != users {
        return Err(Error::DimensionMismatch {
            what: "amplitude count",
            expected: users,
            got: amplitudes.len(),
        });
    }
    if fingers > est.channel().paths() {
        return Err(Error::TooManyFingers {
            fingers,
            paths: est.channel().paths(),
        });
    }
    let mut decided = Array2::default((users, count));
    let mut bits = Vec::with_capacity(users * count * c.bits_per_symbol());
    for i in 0..count {
        for k in 0..users {
            let mut gain = 0.0;
            for q in 0..est.channel().antennas() {
                for l in 0..fingers {
                    gain += est.coeff(q, k, l, i).norm_sqr();
                }
            }
            let scaled = zeta[[k, i]] / (amplitudes[k] * gain);
            let (sym, b) = c.decide(scaled);
            decided[[k, i]] = sym;
            bits.extend(b);
        }
    }
    Ok((decided, bits))
}
