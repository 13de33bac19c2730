//! Joint detection: the decoupled log-likelihood machinery, the exhaustive
//! optimum detector and the binary particle-swarm detector.
//!
//! Candidates are handled in the unscaled real alphabet (each axis on the
//! integer level grid); the constellation energy normalization is folded
//! into the effective amplitudes, so the weight diagonal is
//! `A_k · energy_scale · ĥ_{q,k,l}`. A candidate symbol matrix expands into
//! the branch layout by replicating every symbol once per Rake finger.
//!
//! The per-antenna metric is `Ω_q(d̲) = 2·d̲ᵀWᵀy̲ − d̲ᵀWᵀR̲Wd̲` with
//! `W = [[Re Λ, −Im Λ], [Im Λ, Re Λ]]` for the effective-amplitude diagonal
//! `Λ` and `R̲ = diag(R, R)`; antennas add up. In complex form, with
//! `u = Λ∘d`, this is `2·Re{uᴴy} − Re{uᴴRu}`, which is what the hot path
//! evaluates.

use std::collections::HashMap;

use ndarray::Array2;
use num_complex::Complex64;
use rand::Rng;

use crate::airlink::{CorrelationStructure, DespreadObservation};
use crate::channel::ChannelEstimate;
use crate::modem::Constellation;
use crate::{Error, Result};

/// Hard cap on the exhaustive search space, in candidate bits.
pub const EXHAUSTIVE_BIT_CAP: usize = 20;

/// Everything a detector needs to score candidates for one trial.
#[derive(Debug, Clone)]
pub struct LlfContext {
    users: usize,
    symbols: usize,
    fingers: usize,
    constellation: Constellation,
    /// Despread branch vectors, one per antenna.
    y: Vec<Vec<Complex64>>,
    /// Effective-amplitude diagonals `A_k · scale · ĥ`, one per antenna.
    weights: Vec<Vec<Complex64>>,
    /// Assembled correlation matrices, one per antenna.
    corr: Vec<Array2<f64>>,
}

impl LlfContext {
    /// Assembles the context from despread observations, channel estimates,
    /// per-user amplitudes and per-antenna correlation structures.
    ///
    /// The correlation matrices must carry the block-tridiagonal one-shot
    /// structure (true of [`compute_correlations`] output); the metric skips
    /// the structurally zero blocks.
    ///
    /// [`compute_correlations`]: crate::airlink::compute_correlations
    pub fn build(
        obs: &DespreadObservation,
        est: &ChannelEstimate,
        amplitudes: &[f64],
        corr: Vec<CorrelationStructure>,
        c: &Constellation,
    ) -> Result<Self> {
        let users = obs.users();
        let symbols = obs.symbols();
        let fingers = obs.fingers();
        let branches = obs.branch_count();
        if amplitudes.len() != users {
            return Err(Error::DimensionMismatch {
                what: "amplitude count",
                expected: users,
                got: amplitudes.len(),
            });
        }
        if corr.len() != obs.antennas() {
            return Err(Error::DimensionMismatch {
                what: "correlation structures",
                expected: obs.antennas(),
                got: corr.len(),
            });
        }
        let ch = est.channel();
        if ch.users() != users || ch.symbols() != symbols || ch.paths() < fingers {
            return Err(Error::DimensionMismatch {
                what: "estimate shape",
                expected: branches,
                got: ch.users() * ch.symbols() * ch.paths(),
            });
        }
        let mut y = Vec::with_capacity(obs.antennas());
        let mut weights = Vec::with_capacity(obs.antennas());
        let mut full = Vec::with_capacity(obs.antennas());
        for (q, cs) in corr.into_iter().enumerate() {
            if cs.full.nrows() != branches || cs.full.ncols() != branches {
                return Err(Error::DimensionMismatch {
                    what: "correlation matrix size",
                    expected: branches,
                    got: cs.full.nrows(),
                });
            }
            y.push(obs.vector(q).to_vec());
            let mut w = Vec::with_capacity(branches);
            for i in 0..symbols {
                for k in 0..users {
                    for l in 0..fingers {
                        w.push(amplitudes[k] * c.energy_scale() * est.coeff(q, k, l, i));
                    }
                }
            }
            weights.push(w);
            full.push(cs.full);
        }
        Ok(Self {
            users,
            symbols,
            fingers,
            constellation: c.clone(),
            y,
            weights,
            corr: full,
        })
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

    pub fn antennas(&self) -> usize {
        self.y.len()
    }

    pub fn constellation(&self) -> &Constellation {
        &self.constellation
    }

    /// Branch count `K·I·D`.
    pub fn candidate_len(&self) -> usize {
        self.users * self.symbols * self.fingers
    }

    /// Bits per candidate, `m·K·I`.
    pub fn bit_len(&self) -> usize {
        self.users * self.symbols * self.constellation.bits_per_symbol()
    }

    /// Expands per-(user, symbol) levels into the branch layout, replicating
    /// each symbol once per finger.
    pub fn expand_levels(&self, levels: &Array2<Complex64>) -> Vec<Complex64> {
        let mut out = Vec::with_capacity(self.candidate_len());
        for i in 0..self.symbols {
            for k in 0..self.users {
                for _ in 0..self.fingers {
                    out.push(levels[[k, i]]);
                }
            }
        }
        out
    }

    /// Decodes a candidate bit vector into the unscaled level grid, one
    /// complex level per (user, symbol) in symbol-major order.
    pub fn bits_to_levels(&self, bits: &[u8]) -> Array2<Complex64> {
        let m = self.constellation.bits_per_symbol();
        let mut levels = Array2::default((self.users, self.symbols));
        for i in 0..self.symbols {
            for k in 0..self.users {
                let group = i * self.users + k;
                let label = bits[group * m..(group + 1) * m]
                    .iter()
                    .fold(0usize, |acc, &b| (acc << 1) | (b & 1) as usize);
                levels[[k, i]] = self.constellation.unscaled_point(label);
            }
        }
        levels
    }

    /// Scaled symbol matrix for a candidate bit vector.
    pub fn bits_to_symbols(&self, bits: &[u8]) -> Array2<Complex64> {
        let mut out = self.bits_to_levels(bits);
        out.mapv_inplace(|z| z * self.constellation.energy_scale());
        out
    }

    fn fitness_of_branches(&self, candidate: &[Complex64]) -> f64 {
        debug_assert_eq!(candidate.len(), self.candidate_len());
        let kd = self.users * self.fingers;
        let mut total = 0.0;
        let mut u: Vec<Complex64> = Vec::with_capacity(candidate.len());
        for q in 0..self.antennas() {
            u.clear();
            u.extend(
                self.weights[q]
                    .iter()
                    .zip(candidate)
                    .map(|(w, d)| w * d),
            );
            let mut linear = 0.0;
            for (ua, ya) in u.iter().zip(&self.y[q]) {
                linear += ua.re * ya.re + ua.im * ya.im;
            }
            let r = &self.corr[q];
            let mut quad = 0.0;
            for (a, ua) in u.iter().enumerate() {
                // Only the tridiagonal block band of the row is nonzero.
                let block = a / kd;
                let lo = block.saturating_sub(1) * kd;
                let hi = ((block + 2) * kd).min(u.len());
                let row = r.row(a);
                let mut acc_re = 0.0;
                let mut acc_im = 0.0;
                for (rab, ub) in row
                    .slice(ndarray::s![lo..hi])
                    .iter()
                    .zip(&u[lo..hi])
                {
                    acc_re += rab * ub.re;
                    acc_im += rab * ub.im;
                }
                quad += ua.re * acc_re + ua.im * acc_im;
            }
            total += 2.0 * linear - quad;
        }
        total
    }

    /// Fitness of a candidate given as (user × symbol) levels.
    pub fn fitness_of_levels(&self, levels: &Array2<Complex64>) -> f64 {
        self.fitness_of_branches(&self.expand_levels(levels))
    }

    /// Fitness of a candidate bit vector.
    pub fn fitness_of_bits(&self, bits: &[u8]) -> f64 {
        self.fitness_of_levels(&self.bits_to_levels(bits))
    }
}

/// Combined log-likelihood of a real-decomposed candidate (length `2·K·I·D`,
/// real block first), summed over receive antennas.
pub fn llf(candidate: &[f64], ctx: &LlfContext) -> Result<f64> {
    let n = ctx.candidate_len();
    if candidate.len() != 2 * n {
        return Err(Error::DimensionMismatch {
            what: "candidate length",
            expected: 2 * n,
            got: candidate.len(),
        });
    }
    let branches: Vec<Complex64> = (0..n)
        .map(|a| Complex64::new(candidate[a], candidate[n + a]))
        .collect();
    Ok(ctx.fitness_of_branches(&branches))
}

/// A detector's final answer.
#[derive(Debug, Clone)]
pub struct Detection {
    /// Decided bits in symbol-major layout.
    pub bits: Vec<u8>,
    /// Decided scaled symbols, users × symbols.
    pub symbols: Array2<Complex64>,
    /// Fitness of the decision.
    pub fitness: f64,
}

/// Optimum joint detection by exhaustive enumeration.
///
/// Candidates are enumerated by an integer counter; bit `j` of the counter is
/// bit `j` of the candidate layout, and the first maximizer (lowest counter)
/// wins ties. Errors out when `m·K·I` exceeds [`EXHAUSTIVE_BIT_CAP`].
pub fn omud_exhaustive(ctx: &LlfContext) -> Result<Detection> {
    let nbits = ctx.bit_len();
    if nbits > EXHAUSTIVE_BIT_CAP {
        return Err(Error::SearchSpaceExceeded {
            bits: nbits,
            cap: EXHAUSTIVE_BIT_CAP,
        });
    }
    let mut bits = vec![0u8; nbits];
    let mut best_bits = bits.clone();
    let mut best = f64::NEG_INFINITY;
    for counter in 0..(1u64 << nbits) {
        for (j, b) in bits.iter_mut().enumerate() {
            *b = ((counter >> j) & 1) as u8;
        }
        let fit = ctx.fitness_of_bits(&bits);
        if fit > best {
            best = fit;
            best_bits.copy_from_slice(&bits);
        }
    }
    Ok(Detection {
        symbols: ctx.bits_to_symbols(&best_bits),
        bits: best_bits,
        fitness: best,
    })
}

/// Population size rule: `10·⌈0.3454·(√(π(mKI−1)) + 2)⌉`.
pub fn population_size(bits_per_symbol: usize, users: usize, symbols: usize) -> usize {
    let dim = (bits_per_symbol * users * symbols) as f64;
    assert!(dim >= 1.0);
    10 * (0.3454 * ((std::f64::consts::PI * (dim - 1.0)).sqrt() + 2.0)).ceil() as usize
}

/// Logistic map from velocity to bit probability.
pub fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

/// Initial velocity policy for the swarm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialVelocity {
    #[default]
    Zero,
    /// Uniform on `[-v_max, +v_max]` per component.
    Random,
}

/// Swarm detector parameters.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SwarmConfig {
    /// Inertial weight ω.
    pub omega: f64,
    /// Acceleration toward the personal best.
    pub phi1: f64,
    /// Acceleration toward the global best.
    pub phi2: f64,
    /// Sigmoid saturation bound: position sampling sees velocities clamped
    /// to `[-vmax, vmax]`, so the bit-change probability never drops below
    /// `1 − S(vmax)`.
    pub vmax: f64,
    /// Particles; defaults to [`population_size`] when absent.
    pub population: Option<usize>,
    /// Swarm iterations G.
    pub iterations: usize,
    #[serde(default)]
    pub initial_velocity: InitialVelocity,
    /// Skip re-evaluating unchanged positions. Semantically invisible.
    #[serde(default = "default_true")]
    pub fitness_cache: bool,
}

fn default_true() -> bool {
    true
}

impl SwarmConfig {
    fn with(omega: f64, phi1: f64, phi2: f64, vmax: f64, iterations: usize) -> Self {
        Self {
            omega,
            phi1,
            phi2,
            vmax,
            population: None,
            iterations,
            initial_velocity: InitialVelocity::Zero,
            fitness_cache: true,
        }
    }

    /// Tuned parameters for flat Rayleigh BPSK.
    pub fn flat_bpsk() -> Self {
        Self::with(1.0, 2.0, 10.0, 4.0, 30)
    }

    /// Tuned parameters for flat Rayleigh QPSK.
    pub fn flat_qpsk() -> Self {
        Self::with(1.0, 4.0, 4.0, 4.0, 30)
    }

    /// Tuned parameters for flat Rayleigh 16-QAM.
    pub fn flat_qam16() -> Self {
        Self::with(1.0, 6.0, 1.0, 4.0, 100)
    }

    /// Tuned parameters for BPSK with path or spatial diversity.
    pub fn diversity_bpsk() -> Self {
        Self::with(1.0, 2.0, 15.0, 4.0, 80)
    }

    fn validate(&self, bit_len: usize) -> Result<usize> {
        if !(self.vmax > 0.0) {
            return Err(Error::InvalidScenario(format!(
                "vmax must be positive, got {}",
                self.vmax
            )));
        }
        let pop = self.population.unwrap_or_else(|| {
            // bit_len = m·K·I by construction.
            10 * (0.3454 * ((std::f64::consts::PI * (bit_len as f64 - 1.0)).sqrt() + 2.0))
                .ceil() as usize
        });
        if pop == 0 {
            return Err(Error::InvalidScenario("population must be at least 1".into()));
        }
        Ok(pop)
    }
}

/// One swarm particle: position bits, velocity and personal best.
#[derive(Debug, Clone)]
pub struct Particle {
    pub bits: Vec<u8>,
    pub velocity: Vec<f64>,
    pub best_bits: Vec<u8>,
    pub best_fitness: f64,
}

impl Particle {
    fn new(bits: Vec<u8>) -> Self {
        let velocity = vec![0.0; bits.len()];
        Self {
            best_bits: bits.clone(),
            bits,
            velocity,
            best_fitness: f64::NEG_INFINITY,
        }
    }
}

/// One component of the velocity recursion.
///
/// The stored velocity is not clamped; `vmax` takes effect when a position
/// is sampled, where the sigmoid argument saturates at `±vmax` and floors
/// the bit-change probability at `1 − S(vmax)`. Keeping the accumulated
/// value intact is what makes the inertial weight behave as reported: above
/// one it freezes disagreeing bits beyond what the acceleration terms can
/// reverse, below one it lets settled bits decay back to coin flips.
pub fn velocity_step(
    v: f64,
    bit: u8,
    best_bit: u8,
    gbest_bit: u8,
    u1: f64,
    u2: f64,
    cfg: &SwarmConfig,
) -> f64 {
    cfg.omega * v
        + cfg.phi1 * u1 * (best_bit as f64 - bit as f64)
        + cfg.phi2 * u2 * (gbest_bit as f64 - bit as f64)
}

/// Updates a particle's velocity in place.
///
/// Per component, two fresh uniforms are drawn in order (personal pull
/// first, then global pull).
pub fn velocity_update(
    p: &mut Particle,
    gbest: &[u8],
    cfg: &SwarmConfig,
    rng: &mut impl Rng,
) {
    debug_assert_eq!(p.bits.len(), gbest.len());
    for j in 0..p.bits.len() {
        let u1: f64 = rng.random();
        let u2: f64 = rng.random();
        p.velocity[j] =
            velocity_step(p.velocity[j], p.bits[j], p.best_bits[j], gbest[j], u1, u2, cfg);
    }
}

/// Resamples a particle's position: bit ← 1 with probability `S(v)`, with
/// the sigmoid argument saturated at `±vmax`.
pub fn position_update(p: &mut Particle, cfg: &SwarmConfig, rng: &mut impl Rng) {
    for j in 0..p.bits.len() {
        let u: f64 = rng.random();
        let v = p.velocity[j].clamp(-cfg.vmax, cfg.vmax);
        p.bits[j] = u8::from(u < sigmoid(v));
    }
}

/// Reference data for instantaneous error tracing.
#[derive(Debug, Clone)]
pub struct TruthWindow {
    /// True bits, full symbol-major layout.
    pub bits: Vec<u8>,
    /// Symbol groups (index `i·K + k`) that count toward error statistics.
    pub counted_symbols: Vec<usize>,
}

impl TruthWindow {
    /// Counts all symbols.
    pub fn full(bits: Vec<u8>, bits_per_symbol: usize) -> Self {
        let groups = bits.len() / bits_per_symbol;
        Self {
            bits,
            counted_symbols: (0..groups).collect(),
        }
    }

    /// Bit and symbol errors of a decision over the counted window.
    pub fn errors_of(&self, decided: &[u8], bits_per_symbol: usize) -> TraceErrors {
        let mut bits = 0;
        let mut symbols = 0;
        for &r in &self.counted_symbols {
            let lo = r * bits_per_symbol;
            let hi = lo + bits_per_symbol;
            let diff = self.bits[lo..hi]
                .iter()
                .zip(&decided[lo..hi])
                .filter(|(a, b)| a != b)
                .count();
            bits += diff;
            symbols += usize::from(diff > 0);
        }
        TraceErrors { bits, symbols }
    }

    pub fn counted_bits(&self, bits_per_symbol: usize) -> usize {
        self.counted_symbols.len() * bits_per_symbol
    }
}

/// Errors of one traced decision over the counted window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceErrors {
    pub bits: usize,
    pub symbols: usize,
}

/// One entry of the convergence trace.
#[derive(Debug, Clone, Copy)]
pub struct TracePoint {
    /// 0 is the seed decision, g is after g update rounds.
    pub iteration: usize,
    /// Global best fitness so far.
    pub fitness: f64,
    /// Instantaneous errors of the global best, when truth was provided.
    pub errors: Option<TraceErrors>,
}

/// Swarm detector output: the decision plus its convergence trace.
#[derive(Debug, Clone)]
pub struct PsoOutcome {
    pub detection: Detection,
    pub trace: Vec<TracePoint>,
}

/// Binary particle-swarm detection seeded by the conventional decision.
///
/// The swarm starts as the seed plus `𝒫 − 1` random particles with null
/// initial velocity (unless configured otherwise) and the global best
/// initialized at the seed. Each round evaluates all positions, updates
/// velocities from the previous round's bests, then updates personal bests
/// (strict improvement) and the global best (strict improvement by the
/// round's best particle, lowest index winning ties), and finally resamples
/// positions through the sigmoid rule. With `iterations = 0` the seed is
/// returned unchanged.
///
/// Draw order per round is fixed: velocity uniforms for every particle in
/// index order (two per bit), then position uniforms (one per bit).
pub fn pso_detect(
    ctx: &LlfContext,
    seed_bits: &[u8],
    cfg: &SwarmConfig,
    rng: &mut impl Rng,
    truth: Option<&TruthWindow>,
) -> Result<PsoOutcome> {
    let nbits = ctx.bit_len();
    if seed_bits.len() != nbits {
        return Err(Error::DimensionMismatch {
            what: "seed decision length",
            expected: nbits,
            got: seed_bits.len(),
        });
    }
    let population = cfg.validate(nbits)?;
    let m = ctx.constellation().bits_per_symbol();

    let mut cache: Option<HashMap<Vec<u8>, f64>> = cfg.fitness_cache.then(HashMap::new);
    let mut evaluate = |bits: &[u8]| -> f64 {
        if let Some(cache) = cache.as_mut() {
            if let Some(&fit) = cache.get(bits) {
                return fit;
            }
            let fit = ctx.fitness_of_bits(bits);
            cache.insert(bits.to_vec(), fit);
            fit
        } else {
            ctx.fitness_of_bits(bits)
        }
    };

    let mut particles: Vec<Particle> = Vec::with_capacity(population);
    particles.push(Particle::new(seed_bits.to_vec()));
    for _ in 1..population {
        let bits: Vec<u8> = (0..nbits).map(|_| u8::from(rng.random::<bool>())).collect();
        particles.push(Particle::new(bits));
    }
    if cfg.initial_velocity == InitialVelocity::Random {
        for p in particles.iter_mut() {
            for v in p.velocity.iter_mut() {
                *v = cfg.vmax * (2.0 * rng.random::<f64>() - 1.0);
            }
        }
    }

    let mut gbest = seed_bits.to_vec();
    let mut gbest_fit = evaluate(&gbest);
    let mut trace = Vec::with_capacity(cfg.iterations + 1);
    let trace_errors = |bits: &[u8]| truth.map(|t| t.errors_of(bits, m));
    trace.push(TracePoint {
        iteration: 0,
        fitness: gbest_fit,
        errors: trace_errors(&gbest),
    });

    let mut fits = vec![0.0f64; population];
    for round in 0..cfg.iterations {
        for (p, fit) in particles.iter().zip(fits.iter_mut()) {
            *fit = evaluate(&p.bits);
        }
        if round == 0 {
            for (p, &fit) in particles.iter_mut().zip(&fits) {
                p.best_fitness = fit;
            }
        }
        for (p, &fit) in particles.iter_mut().zip(&fits) {
            if fit > p.best_fitness {
                p.best_fitness = fit;
                p.best_bits.copy_from_slice(&p.bits);
            }
        }
        let mut round_best = 0usize;
        for (idx, &fit) in fits.iter().enumerate() {
            if fit > fits[round_best] {
                round_best = idx;
            }
        }
        if fits[round_best] > gbest_fit {
            gbest_fit = fits[round_best];
            gbest.copy_from_slice(&particles[round_best].bits);
        }
        trace.push(TracePoint {
            iteration: round + 1,
            fitness: gbest_fit,
            errors: trace_errors(&gbest),
        });
        for p in particles.iter_mut() {
            velocity_update(p, &gbest, cfg, rng);
            position_update(p, cfg, rng);
        }
    }

    Ok(PsoOutcome {
        detection: Detection {
            symbols: ctx.bits_to_symbols(&gbest),
            bits: gbest,
            fitness: gbest_fit,
        },
        trace,
    })
}
