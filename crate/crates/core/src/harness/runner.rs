//! Monte Carlo trial execution.
//!
//! Each trial owns two independent RNG streams derived from
//! `(master seed, point index, trial index)`: one for the physics (sequences,
//! channel, data bits, noise, estimation errors — in that order) and one for
//! the detector, so sweeping a swarm parameter never perturbs the channel
//! draws and any single trial can be re-run in isolation. Trials are
//! independent work units; shard merging is integer-counter addition, so any
//! worker count produces identical statistics.

use ndarray::Array2;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::airlink::{
    compute_correlations, conventional_decide, despread, generate_sequences, mrc_combine,
    synthesize_received,
};
use crate::analysis::ErrorStats;
use crate::channel::{corrupt_estimate, draw_channel, ChannelEstimate};
use crate::detectors::{pso_detect, LlfContext, TraceErrors, TruthWindow};
use crate::harness::config::{Scenario, SweepSpec};
use crate::{Error, Result};

const STREAM_PHYSICS: u64 = 0;
const STREAM_DETECTOR: u64 = 1;

/// Counter-based per-trial RNG derivation.
fn trial_rng(master: u64, point: u64, trial: u64, stream: u64) -> ChaCha8Rng {
    let mut seed = [0u8; 32];
    seed[0..8].copy_from_slice(&master.to_le_bytes());
    seed[8..16].copy_from_slice(&point.to_le_bytes());
    seed[16..24].copy_from_slice(&trial.to_le_bytes());
    seed[24..32].copy_from_slice(&stream.to_le_bytes());
    ChaCha8Rng::from_seed(seed)
}

/// Statistics for one Eb/N0 point.
#[derive(Debug, Clone)]
pub struct PointReport {
    pub ebn0_db: f64,
    pub trials: u64,
    /// Analytic single-user BER floor, when computable.
    pub sub_ber: Option<f64>,
    /// Analytic single-user SER floor, when computable.
    pub sub_ser: Option<f64>,
    pub cd: Option<ErrorStats>,
    /// Swarm statistics per iteration, 0 (the seed) through G.
    pub pso: Option<Vec<ErrorStats>>,
}

/// All points of one scenario.
#[derive(Debug, Clone)]
pub struct ScenarioReport {
    pub scenario: Scenario,
    pub points: Vec<PointReport>,
}

/// One grid cell of a sweep.
#[derive(Debug, Clone)]
pub struct SweepCell {
    pub value: f64,
    pub report: ScenarioReport,
}

/// All cells of a sweep.
#[derive(Debug, Clone)]
pub struct SweepReport {
    pub name: String,
    pub parameter: &'static str,
    pub cells: Vec<SweepCell>,
}

struct TrialOutcome {
    cd: TraceErrors,
    pso: Option<Vec<TraceErrors>>,
}

#[derive(Clone)]
struct PointAccumulator {
    cd: ErrorStats,
    pso: Option<Vec<ErrorStats>>,
}

impl PointAccumulator {
    fn empty(bits_per_trial: usize, bits_per_symbol: usize, pso_len: Option<usize>) -> Self {
        Self {
            cd: ErrorStats::new(bits_per_trial, bits_per_symbol),
            pso: pso_len
                .map(|len| vec![ErrorStats::new(bits_per_trial, bits_per_symbol); len]),
        }
    }

    fn add(mut self, out: TrialOutcome) -> Self {
        self.cd.record(out.cd.bits as u64, out.cd.symbols as u64);
        if let (Some(stats), Some(trace)) = (self.pso.as_mut(), out.pso) {
            debug_assert_eq!(stats.len(), trace.len());
            for (s, e) in stats.iter_mut().zip(trace) {
                s.record(e.bits as u64, e.symbols as u64);
            }
        }
        self
    }

    fn merge(mut self, other: Self) -> Self {
        self.cd.merge(&other.cd).expect("accumulator shapes match");
        if let (Some(a), Some(b)) = (self.pso.as_mut(), other.pso) {
            for (x, y) in a.iter_mut().zip(&b) {
                x.merge(y).expect("accumulator shapes match");
            }
        }
        self
    }
}

fn run_trial(
    s: &Scenario,
    amplitudes: &[f64],
    counted: &[usize],
    point: u64,
    trial: u64,
    noise_psd: f64,
) -> TrialOutcome {
    let mut physics = trial_rng(s.master_seed, point, trial, STREAM_PHYSICS);
    let c = &s.constellation;
    let m = c.bits_per_symbol();

    let sequences = generate_sequences(s.users, s.gain, &mut physics);
    let ch = draw_channel(
        &s.profile,
        s.users,
        s.symbols,
        s.antennas,
        s.fading,
        s.timing(),
        &mut physics,
    );
    let truth: Vec<u8> = (0..s.users * s.symbols * m)
        .map(|_| u8::from(physics.random::<bool>()))
        .collect();
    let mut symbols = Array2::<Complex64>::default((s.users, s.symbols));
    for i in 0..s.symbols {
        for k in 0..s.users {
            let group = i * s.users + k;
            symbols[[k, i]] = c
                .bits_to_symbol(&truth[group * m..(group + 1) * m])
                .expect("truth groups have m bits");
        }
    }
    let stream = synthesize_received(&symbols, amplitudes, &ch, &sequences, noise_psd, &mut physics)
        .expect("scenario dimensions are validated");
    let est = if s.csi_error == (0.0, 0.0) {
        ChannelEstimate::perfect(&ch)
    } else {
        corrupt_estimate(&ch, s.csi_error.0, s.csi_error.1, &mut physics)
            .expect("csi bounds are validated")
    };
    let obs = despread(&stream, &sequences, &ch, s.fingers).expect("fingers are validated");
    let zeta = mrc_combine(&obs, &est).expect("estimate matches the observation");
    let (_, cd_bits) = conventional_decide(&zeta, &est, amplitudes, s.fingers, c)
        .expect("decision dimensions are validated");

    let window = TruthWindow {
        bits: truth,
        counted_symbols: counted.to_vec(),
    };
    let cd_errors = window.errors_of(&cd_bits, m);

    let pso = s.run_pso.then(|| {
        let corr: Vec<_> = (0..s.antennas)
            .map(|q| {
                compute_correlations(&sequences, &ch, s.fingers, q)
                    .expect("correlation dimensions are validated")
            })
            .collect();
        let ctx = LlfContext::build(&obs, &est, amplitudes, corr, c)
            .expect("context dimensions are validated");
        let mut detector = trial_rng(s.master_seed, point, trial, STREAM_DETECTOR);
        let outcome = pso_detect(&ctx, &cd_bits, &s.swarm, &mut detector, Some(&window))
            .expect("seed comes from the conventional detector");
        outcome
            .trace
            .iter()
            .map(|t| t.errors.expect("truth was provided"))
            .collect::<Vec<_>>()
    });

    TrialOutcome {
        cd: cd_errors,
        pso,
    }
}

/// Runs every Eb/N0 point of a scenario.
pub fn run_scenario(s: &Scenario) -> Result<ScenarioReport> {
    let amplitudes = s.amplitudes();
    let counted = s.counted_symbols();
    if counted.is_empty() {
        return Err(Error::InvalidScenario(
            "no counted symbols; nothing to measure".into(),
        ));
    }
    let m = s.bits_per_symbol();
    let bits_per_trial = counted.len() * m;
    let pso_len = s.run_pso.then_some(s.swarm.iterations + 1);

    let mut points = Vec::with_capacity(s.ebn0_db.len());
    for (pidx, &ebn0) in s.ebn0_db.iter().enumerate() {
        let sub = s.sub_reference(ebn0);
        let trials = s.trials_for(sub.as_ref())?;
        let noise_psd = s.noise_psd(ebn0);
        let acc = (0..trials)
            .into_par_iter()
            .map(|t| run_trial(s, &amplitudes, &counted, pidx as u64, t, noise_psd))
            .fold(
                || PointAccumulator::empty(bits_per_trial, m, pso_len),
                PointAccumulator::add,
            )
            .reduce(
                || PointAccumulator::empty(bits_per_trial, m, pso_len),
                PointAccumulator::merge,
            );
        points.push(PointReport {
            ebn0_db: ebn0,
            trials,
            sub_ber: sub.map(|r| r.ber),
            sub_ser: sub.map(|r| r.ser),
            cd: s.run_cd.then_some(acc.cd),
            pso: acc.pso,
        });
    }
    Ok(ScenarioReport {
        scenario: s.clone(),
        points,
    })
}

/// Runs every cell of a sweep under common random numbers.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepReport> {
    let mut cells = Vec::with_capacity(spec.values.len());
    for &value in &spec.values {
        let scenario = spec.apply(value)?;
        let report = run_scenario(&scenario)?;
        cells.push(SweepCell { value, report });
    }
    Ok(SweepReport {
        name: spec.name.clone(),
        parameter: spec.parameter.name(),
        cells,
    })
}
