//! Shared helpers and independent oracles for the integration and
//! acceptance suites. Everything here deliberately re-derives results
//! through a different route than the library hot paths.

#![allow(dead_code)]

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mudlab::airlink::{
    compute_correlations, conventional_decide, despread, generate_sequences, mrc_combine,
    synthesize_received, CorrelationStructure, DespreadObservation, SpreadingSet,
};
use mudlab::channel::{
    corrupt_estimate, draw_channel, ChannelEstimate, ChannelRealization, FadingMode,
    PowerDelayProfile, Timing,
};
use mudlab::detectors::LlfContext;
use mudlab::modem::Constellation;

/// Everything one simulated trial produces, kept around for oracles.
pub struct Instance {
    pub constellation: Constellation,
    pub sequences: SpreadingSet,
    pub channel: ChannelRealization,
    pub estimate: ChannelEstimate,
    pub amplitudes: Vec<f64>,
    pub truth_bits: Vec<u8>,
    pub symbols: Array2<Complex64>,
    pub observation: DespreadObservation,
    pub correlations: Vec<CorrelationStructure>,
    pub ctx: LlfContext,
    pub cd_bits: Vec<u8>,
}

pub struct InstanceConfig {
    pub constellation: Constellation,
    pub users: usize,
    pub symbols: usize,
    pub antennas: usize,
    pub fingers: usize,
    pub profile: PowerDelayProfile,
    pub synchronous: bool,
    pub gain: usize,
    pub ebn0_db: f64,
    pub csi: (f64, f64),
}

impl InstanceConfig {
    pub fn flat(constellation: Constellation, users: usize, ebn0_db: f64) -> Self {
        Self {
            constellation,
            users,
            symbols: 1,
            antennas: 1,
            fingers: 1,
            profile: PowerDelayProfile::pd1(),
            synchronous: true,
            gain: 31,
            ebn0_db,
            csi: (0.0, 0.0),
        }
    }
}

pub fn random_instance(cfg: &InstanceConfig, seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = &cfg.constellation;
    let m = c.bits_per_symbol();
    let sequences = generate_sequences(cfg.users, cfg.gain, &mut rng);
    let timing = if cfg.synchronous {
        Timing::Synchronous
    } else {
        Timing::Asynchronous {
            gain: cfg.gain,
            per_antenna: false,
        }
    };
    let channel = draw_channel(
        &cfg.profile,
        cfg.users,
        cfg.symbols,
        cfg.antennas,
        FadingMode::Slow,
        timing,
        &mut rng,
    );
    let truth_bits: Vec<u8> = (0..cfg.users * cfg.symbols * m)
        .map(|_| u8::from(rng.random::<bool>()))
        .collect();
    let mut symbols = Array2::<Complex64>::default((cfg.users, cfg.symbols));
    for i in 0..cfg.symbols {
        for k in 0..cfg.users {
            let group = i * cfg.users + k;
            symbols[[k, i]] = c
                .bits_to_symbol(&truth_bits[group * m..(group + 1) * m])
                .unwrap();
        }
    }
    let amplitudes = vec![(m as f64).sqrt(); cfg.users];
    let noise_psd = 10f64.powf(-cfg.ebn0_db / 10.0);
    let stream =
        synthesize_received(&symbols, &amplitudes, &channel, &sequences, noise_psd, &mut rng)
            .unwrap();
    let estimate = if cfg.csi == (0.0, 0.0) {
        ChannelEstimate::perfect(&channel)
    } else {
        corrupt_estimate(&channel, cfg.csi.0, cfg.csi.1, &mut rng).unwrap()
    };
    let observation = despread(&stream, &sequences, &channel, cfg.fingers).unwrap();
    let correlations: Vec<CorrelationStructure> = (0..cfg.antennas)
        .map(|q| compute_correlations(&sequences, &channel, cfg.fingers, q).unwrap())
        .collect();
    let ctx = LlfContext::build(
        &observation,
        &estimate,
        &amplitudes,
        correlations.clone(),
        c,
    )
    .unwrap();
    let zeta = mrc_combine(&observation, &estimate).unwrap();
    let (_, cd_bits) =
        conventional_decide(&zeta, &estimate, &amplitudes, cfg.fingers, c).unwrap();
    Instance {
        constellation: c.clone(),
        sequences,
        channel,
        estimate,
        amplitudes,
        truth_bits,
        symbols,
        observation,
        correlations,
        ctx,
        cd_bits,
    }
}

/// Gaussian tail probability Q(x).
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x / 2.0_f64.sqrt())
}

fn adaptive_simpson(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    eps: f64,
    depth: usize,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * eps {
        left + right + delta / 15.0
    } else {
        adaptive_simpson(f, a, m, fa, flm, fm, left, eps / 2.0, depth - 1)
            + adaptive_simpson(f, m, b, fm, frm, fb, right, eps / 2.0, depth - 1)
    }
}

pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, eps: f64) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    adaptive_simpson(&f, a, b, fa, fm, fb, whole, eps, 48)
}

/// Integrates over `[0, upper]` on a geometric mesh starting at `scale`, so
/// integrands concentrated near the origin are not missed by the opening
/// panels of a plain adaptive pass.
pub fn integrate_graded(f: impl Fn(f64) -> f64, scale: f64, upper: f64, eps: f64) -> f64 {
    let mut total = 0.0;
    let mut lo = 0.0;
    let mut hi = scale.min(upper);
    loop {
        total += integrate(&f, lo, hi, eps);
        if hi >= upper {
            break;
        }
        lo = hi;
        hi = (hi * 2.0).min(upper);
    }
    total
}

/// Quadrature oracle for the square-QAM single-user SER over MRC Rayleigh
/// branches with pairwise distinct mean symbol SNRs: integrates the exact
/// conditional SER against the combined-SNR density.
pub fn qam_ser_quadrature(order: usize, symbol_snrs: &[f64]) -> f64 {
    assert!(order == 4 || order == 16);
    assert!(symbol_snrs.iter().all(|&nu| nu > 0.0));
    let weights: Vec<f64> = symbol_snrs
        .iter()
        .enumerate()
        .map(|(l, &nu_l)| {
            symbol_snrs
                .iter()
                .enumerate()
                .filter(|&(k, _)| k != l)
                .map(|(_, &nu_k)| 1.0 - nu_k / nu_l)
                .product::<f64>()
                .recip()
        })
        .collect();
    let alpha = 1.0 - 1.0 / (order as f64).sqrt();
    let g = 3.0 / (2.0 * (order as f64 - 1.0));
    let conditional = move |nu: f64| {
        let q = q_function((2.0 * g * nu).sqrt());
        4.0 * alpha * q - 4.0 * alpha * alpha * q * q
    };
    let snrs = symbol_snrs.to_vec();
    let density = move |nu: f64| {
        snrs.iter()
            .zip(&weights)
            .map(|(&nu_l, &p)| p * (-nu / nu_l).exp() / nu_l)
            .sum::<f64>()
    };
    let max_nu = symbol_snrs.iter().cloned().fold(0.0, f64::max);
    let min_nu = symbol_snrs.iter().cloned().fold(f64::INFINITY, f64::min);
    let scale = (1.0 / g).min(min_nu) / 1024.0;
    integrate_graded(
        move |nu| conditional(nu) * density(nu),
        scale,
        80.0 * max_nu,
        3.0e-15,
    )
}

/// BPSK analogue of [`qam_ser_quadrature`], over mean bit SNRs.
pub fn bpsk_ber_quadrature(bit_snrs: &[f64]) -> f64 {
    let weights: Vec<f64> = bit_snrs
        .iter()
        .enumerate()
        .map(|(l, &nu_l)| {
            bit_snrs
                .iter()
                .enumerate()
                .filter(|&(k, _)| k != l)
                .map(|(_, &nu_k)| 1.0 - nu_k / nu_l)
                .product::<f64>()
                .recip()
        })
        .collect();
    let snrs = bit_snrs.to_vec();
    let density = move |nu: f64| {
        snrs.iter()
            .zip(&weights)
            .map(|(&nu_l, &p)| p * (-nu / nu_l).exp() / nu_l)
            .sum::<f64>()
    };
    let max_nu = bit_snrs.iter().cloned().fold(0.0, f64::max);
    let min_nu = bit_snrs.iter().cloned().fold(f64::INFINITY, f64::min);
    let scale = min_nu.min(1.0) / 1024.0;
    integrate_graded(
        move |nu| q_function((2.0 * nu).sqrt()) * density(nu),
        scale,
        80.0 * max_nu,
        3.0e-15,
    )
}

/// Independent exhaustive joint detector: dense real-valued algebra over an
/// explicit weight matrix, real correlation extension and stacked
/// observation, enumerating every label combination by counter.
pub fn exhaustive_oracle(inst: &Instance) -> (Vec<u8>, f64) {
    let c = &inst.constellation;
    let obs = &inst.observation;
    let users = obs.users();
    let count = obs.symbols();
    let fingers = obs.fingers();
    let n = users * count * fingers;
    let m = c.bits_per_symbol();
    let nbits = m * users * count;
    assert!(nbits <= 24, "oracle instance too large");

    // Dense per-antenna pieces.
    let mut dense: Vec<(Array2<f64>, Array2<f64>, Array1<f64>)> = Vec::new();
    for q in 0..obs.antennas() {
        let mut w = Array2::<f64>::zeros((2 * n, 2 * n));
        for i in 0..count {
            for k in 0..users {
                for l in 0..fingers {
                    let a = (i * users + k) * fingers + l;
                    let lam = inst.amplitudes[k]
                        * c.energy_scale()
                        * inst.estimate.coeff(q, k, l, i);
                    w[[a, a]] = lam.re;
                    w[[a, n + a]] = -lam.im;
                    w[[n + a, a]] = lam.im;
                    w[[n + a, n + a]] = lam.re;
                }
            }
        }
        let full = &inst.correlations[q].full;
        let mut rbar = Array2::<f64>::zeros((2 * n, 2 * n));
        for a in 0..n {
            for b in 0..n {
                rbar[[a, b]] = full[[a, b]];
                rbar[[n + a, n + b]] = full[[a, b]];
            }
        }
        let mut ybar = Array1::<f64>::zeros(2 * n);
        for (a, z) in obs.vector(q).iter().enumerate() {
            ybar[a] = z.re;
            ybar[n + a] = z.im;
        }
        dense.push((w, rbar, ybar));
    }

    let mut best_bits = vec![0u8; nbits];
    let mut best = f64::NEG_INFINITY;
    let mut bits = vec![0u8; nbits];
    for counter in 0..(1u64 << nbits) {
        for (j, b) in bits.iter_mut().enumerate() {
            *b = ((counter >> j) & 1) as u8;
        }
        // Candidate in stacked real form, fingers replicated.
        let mut d = Array1::<f64>::zeros(2 * n);
        for i in 0..count {
            for k in 0..users {
                let group = i * users + k;
                let label = bits[group * m..(group + 1) * m]
                    .iter()
                    .fold(0usize, |acc, &b| (acc << 1) | b as usize);
                let point = c.unscaled_point(label);
                for l in 0..fingers {
                    let a = (i * users + k) * fingers + l;
                    d[a] = point.re;
                    d[n + a] = point.im;
                }
            }
        }
        let mut fit = 0.0;
        for (w, rbar, ybar) in &dense {
            let wd = w.dot(&d);
            fit += 2.0 * wd.dot(ybar) - wd.dot(&rbar.dot(&wd));
        }
        if fit > best {
            best = fit;
            best_bits.copy_from_slice(&bits);
        }
    }
    (best_bits, best)
}
