//! Scenario and sweep configuration: the TOML file model, validation, and
//! the resolved runtime forms.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::analysis;
use crate::channel::{FadingMode, PowerDelayProfile, Timing};
use crate::detectors::SwarmConfig;
use crate::modem::Constellation;
use crate::{Error, Result};

/// Root of a config file: named scenarios and sweeps.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ConfigFile {
    #[serde(default)]
    pub scenario: BTreeMap<String, ScenarioSpec>,
    #[serde(default)]
    pub sweep: BTreeMap<String, SweepSpecFile>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    /// Resolves a named scenario (or the only one, when unambiguous).
    pub fn scenario(&self, name: Option<&str>) -> Result<(Scenario, Vec<String>)> {
        let (name, spec) = self.pick(&self.scenario, name, "scenario")?;
        Scenario::from_spec(name, spec)
    }

    /// Resolves a named sweep (or the only one, when unambiguous).
    pub fn sweep(&self, name: Option<&str>) -> Result<(SweepSpec, Vec<String>)> {
        let (sweep_name, spec) = self.pick(&self.sweep, name, "sweep")?;
        let (base, warnings) = self.scenario(Some(&spec.scenario))?;
        let sweep = SweepSpec::new(sweep_name, base, spec.parameter, spec.values.clone())?;
        Ok((sweep, warnings))
    }

    fn pick<'a, T>(
        &'a self,
        map: &'a BTreeMap<String, T>,
        name: Option<&str>,
        what: &str,
    ) -> Result<(String, &'a T)> {
        match name {
            Some(n) => map
                .get(n)
                .map(|t| (n.to_string(), t))
                .ok_or_else(|| Error::InvalidConfig(format!("no {what} named {n:?}"))),
            None => {
                if map.len() == 1 {
                    let (k, v) = map.iter().next().expect("len checked");
                    Ok((k.clone(), v))
                } else {
                    Err(Error::InvalidConfig(format!(
                        "config defines {} {what}s; pick one with --{what}",
                        map.len()
                    )))
                }
            }
        }
    }
}

/// Power-delay profile selection: a named table entry or a custom list.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProfileSpec {
    Name(String),
    Custom { delays: Vec<usize>, energies: Vec<f64> },
}

/// Near-far setup: the listed users transmit `offset_db` above the rest and
/// error statistics are computed only for the weaker users.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NfrSpec {
    pub offset_db: f64,
    pub strong_users: Vec<usize>,
}

/// Channel estimation error bounds.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct CsiErrorSpec {
    #[serde(default)]
    pub gamma: f64,
    #[serde(default)]
    pub theta: f64,
}

/// Trial budget: a fixed count per point, or driven by the minimal-trial
/// rule against the single-user bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum TrialBudget {
    Fixed { count: u64 },
    MinTrials {
        #[serde(default = "default_errors")]
        errors: u64,
    },
}

fn default_errors() -> u64 {
    analysis::MIN_RELIABLE_ERRORS
}

impl Default for TrialBudget {
    fn default() -> Self {
        TrialBudget::MinTrials {
            errors: default_errors(),
        }
    }
}

/// Swarm parameter overrides layered on the per-scenario defaults.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SwarmSpec {
    pub omega: Option<f64>,
    pub phi1: Option<f64>,
    pub phi2: Option<f64>,
    pub vmax: Option<f64>,
    pub population: Option<usize>,
    pub iterations: Option<usize>,
    pub initial_velocity: Option<crate::detectors::InitialVelocity>,
    pub fitness_cache: Option<bool>,
}

/// One scenario as written in a config file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub constellation: String,
    pub users: usize,
    pub gain: usize,
    #[serde(default = "one")]
    pub symbols: usize,
    #[serde(default = "one")]
    pub paths: usize,
    /// Rake fingers; defaults to `paths`.
    pub fingers: Option<usize>,
    #[serde(default = "one")]
    pub antennas: usize,
    #[serde(default = "default_true")]
    pub synchronous: bool,
    pub profile: Option<ProfileSpec>,
    pub ebn0_db: Vec<f64>,
    pub nfr: Option<NfrSpec>,
    pub csi_error: Option<CsiErrorSpec>,
    pub fading: Option<FadingMode>,
    #[serde(default)]
    pub per_antenna_delays: bool,
    pub trials: Option<TrialBudget>,
    pub seed: Option<u64>,
    /// Any subset of `["cd", "pso"]`; defaults to both.
    pub detectors: Option<Vec<String>>,
    pub swarm: Option<SwarmSpec>,
}

fn one() -> usize {
    1
}

fn default_true() -> bool {
    true
}

/// A fully validated, runnable scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub constellation: Constellation,
    pub users: usize,
    pub gain: usize,
    pub symbols: usize,
    pub paths: usize,
    pub fingers: usize,
    pub antennas: usize,
    pub synchronous: bool,
    pub profile: PowerDelayProfile,
    pub ebn0_db: Vec<f64>,
    pub nfr: Option<NfrSpec>,
    pub csi_error: (f64, f64),
    pub fading: FadingMode,
    pub per_antenna_delays: bool,
    pub budget: TrialBudget,
    pub master_seed: u64,
    pub run_cd: bool,
    pub run_pso: bool,
    pub swarm: SwarmConfig,
}

impl Scenario {
    /// Validates a spec into a runnable scenario plus extrapolation warnings
    /// for fields outside the studied parameter ranges.
    pub fn from_spec(name: String, spec: &ScenarioSpec) -> Result<(Self, Vec<String>)> {
        let constellation = Constellation::from_name(&spec.constellation)?;
        let profile = match &spec.profile {
            None => {
                if spec.paths == 1 {
                    PowerDelayProfile::pd1()
                } else {
                    return Err(Error::InvalidScenario(
                        "multipath scenarios need an explicit profile".into(),
                    ));
                }
            }
            Some(ProfileSpec::Name(n)) => PowerDelayProfile::from_name(n)?,
            Some(ProfileSpec::Custom { delays, energies }) => {
                PowerDelayProfile::new(delays.clone(), energies.clone())?
            }
        };
        if profile.path_count() != spec.paths {
            return Err(Error::InvalidScenario(format!(
                "profile has {} paths but the scenario declares {}",
                profile.path_count(),
                spec.paths
            )));
        }
        let fingers = spec.fingers.unwrap_or(spec.paths);
        if fingers == 0 || fingers > spec.paths {
            return Err(Error::TooManyFingers {
                fingers,
                paths: spec.paths,
            });
        }
        if spec.users == 0 || spec.users > 128 {
            return Err(Error::InvalidScenario(format!(
                "users must be in 1..=128, got {}",
                spec.users
            )));
        }
        if spec.gain == 0 {
            return Err(Error::InvalidScenario("gain must be at least 1".into()));
        }
        if spec.symbols == 0 {
            return Err(Error::InvalidScenario("symbols must be at least 1".into()));
        }
        if !spec.synchronous {
            if spec.symbols < 3 {
                return Err(Error::InvalidScenario(
                    "asynchronous detection needs at least 3 symbols".into(),
                ));
            }
            if spec.gain <= profile.max_delay() {
                return Err(Error::InvalidScenario(format!(
                    "gain {} does not exceed the profile delay spread {}",
                    spec.gain,
                    profile.max_delay()
                )));
            }
        }
        if spec.ebn0_db.is_empty() {
            return Err(Error::InvalidScenario("ebn0_db must be non-empty".into()));
        }
        if let Some(nfr) = &spec.nfr {
            if nfr.strong_users.iter().any(|&k| k >= spec.users) {
                return Err(Error::InvalidScenario(
                    "nfr.strong_users contains an out-of-range user index".into(),
                ));
            }
            let strong = nfr.strong_users.len();
            let distinct: std::collections::BTreeSet<_> =
                nfr.strong_users.iter().collect();
            if distinct.len() != strong {
                return Err(Error::InvalidScenario(
                    "nfr.strong_users contains duplicates".into(),
                ));
            }
            if strong >= spec.users {
                return Err(Error::InvalidScenario(
                    "at least one weak user is needed for NFR statistics".into(),
                ));
            }
        }
        let csi = spec.csi_error.unwrap_or_default();
        for eps in [csi.gamma, csi.theta] {
            if !(0.0..1.0).contains(&eps) {
                return Err(Error::ErrorBoundOutOfRange(eps));
            }
        }
        let (run_cd, run_pso) = match &spec.detectors {
            None => (true, true),
            Some(list) => {
                let mut cd = false;
                let mut pso = false;
                for d in list {
                    match d.as_str() {
                        "cd" => cd = true,
                        "pso" => pso = true,
                        other => {
                            return Err(Error::InvalidScenario(format!(
                                "unknown detector {other:?} (expected cd or pso)"
                            )))
                        }
                    }
                }
                (cd, pso)
            }
        };
        let budget = spec.trials.unwrap_or_default();

        let diversity = spec.paths > 1 || spec.antennas > 1;
        let mut swarm = match (constellation.order(), diversity) {
            (2, false) => SwarmConfig::flat_bpsk(),
            (2, true) => SwarmConfig::diversity_bpsk(),
            (4, _) => SwarmConfig::flat_qpsk(),
            _ => SwarmConfig::flat_qam16(),
        };
        if let Some(over) = &spec.swarm {
            if let Some(v) = over.omega {
                swarm.omega = v;
            }
            if let Some(v) = over.phi1 {
                swarm.phi1 = v;
            }
            if let Some(v) = over.phi2 {
                swarm.phi2 = v;
            }
            if let Some(v) = over.vmax {
                swarm.vmax = v;
            }
            if over.population.is_some() {
                swarm.population = over.population;
            }
            if let Some(v) = over.iterations {
                swarm.iterations = v;
            }
            if let Some(v) = over.initial_velocity {
                swarm.initial_velocity = v;
            }
            if let Some(v) = over.fitness_cache {
                swarm.fitness_cache = v;
            }
        }
        if !(swarm.vmax > 0.0) {
            return Err(Error::InvalidScenario("swarm.vmax must be positive".into()));
        }

        let scenario = Scenario {
            name,
            constellation,
            users: spec.users,
            gain: spec.gain,
            symbols: spec.symbols,
            paths: spec.paths,
            fingers,
            antennas: spec.antennas,
            synchronous: spec.synchronous,
            profile,
            ebn0_db: spec.ebn0_db.clone(),
            nfr: spec.nfr.clone(),
            csi_error: (csi.gamma, csi.theta),
            fading: spec.fading.unwrap_or(FadingMode::Slow),
            per_antenna_delays: spec.per_antenna_delays,
            budget,
            master_seed: spec.seed.unwrap_or(1),
            run_cd,
            run_pso,
            swarm,
        };

        if matches!(scenario.budget, TrialBudget::MinTrials { .. })
            && scenario.sub_reference(scenario.ebn0_db[0]).is_none()
        {
            return Err(Error::InvalidScenario(
                "min-trials budget needs a computable single-user bound \
                 (single antenna, pairwise distinct path energies); use a fixed trial count"
                    .into(),
            ));
        }

        let mut warnings = Vec::new();
        if !(5..=31).contains(&scenario.users) {
            warnings.push(format!(
                "users = {} is outside the studied range [5, 31]",
                scenario.users
            ));
        }
        if scenario.gain != 31 {
            warnings.push(format!("gain = {} differs from the studied N = 31", scenario.gain));
        }
        if scenario.antennas > 3 {
            warnings.push(format!(
                "antennas = {} is outside the studied range [1, 3]",
                scenario.antennas
            ));
        }
        if scenario.paths > 3 {
            warnings.push(format!(
                "paths = {} is outside the studied range [1, 3]",
                scenario.paths
            ));
        }
        for &e in &scenario.ebn0_db {
            if !(0.0..=30.0).contains(&e) {
                warnings.push(format!("Eb/N0 = {e} dB is outside the studied range [0, 30]"));
                break;
            }
        }
        Ok((scenario, warnings))
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.constellation.bits_per_symbol()
    }

    /// Per-user amplitudes `√E_sk` with `E_b = 1` for the reference users and
    /// the NFR offset applied to the strong ones.
    pub fn amplitudes(&self) -> Vec<f64> {
        let base = (self.bits_per_symbol() as f64).sqrt();
        let mut amps = vec![base; self.users];
        if let Some(nfr) = &self.nfr {
            let boost = 10f64.powf(nfr.offset_db / 20.0);
            for &k in &nfr.strong_users {
                amps[k] = base * boost;
            }
        }
        amps
    }

    /// One-sided noise spectral density for a given Eb/N0 (reference user,
    /// `E_b = 1`).
    pub fn noise_psd(&self, ebn0_db: f64) -> f64 {
        10f64.powf(-ebn0_db / 10.0)
    }

    /// Symbol groups (index `i·K + k`) that count toward error statistics:
    /// the inner symbols of the one-shot window (all of them when
    /// synchronous or shorter than 3), restricted to weak users under NFR.
    pub fn counted_symbols(&self) -> Vec<usize> {
        let inner: Vec<usize> = if !self.synchronous && self.symbols >= 3 {
            (1..self.symbols - 1).collect()
        } else {
            (0..self.symbols).collect()
        };
        let counted_user = |k: usize| match &self.nfr {
            Some(nfr) => !nfr.strong_users.contains(&k),
            None => true,
        };
        let mut out = Vec::new();
        for &i in &inner {
            for k in 0..self.users {
                if counted_user(k) {
                    out.push(i * self.users + k);
                }
            }
        }
        out
    }

    pub fn timing(&self) -> Timing {
        if self.synchronous {
            Timing::Synchronous
        } else {
            Timing::Asynchronous {
                gain: self.gain,
                per_antenna: self.per_antenna_delays,
            }
        }
    }

    /// Analytic single-user reference at one operating point, when the
    /// closed forms apply (single antenna, distinct branch SNRs). The BER for
    /// the QAM orders is the Gray approximation SER/m.
    pub fn sub_reference(&self, ebn0_db: f64) -> Option<SubReference> {
        if self.antennas != 1 {
            return None;
        }
        let ebn0 = 10f64.powf(ebn0_db / 10.0);
        let bit_snrs: Vec<f64> = self.profile.energies().iter().map(|e| e * ebn0).collect();
        match self.constellation.order() {
            2 => {
                let ber = analysis::sub_ber_bpsk(&bit_snrs).ok()?;
                Some(SubReference { ser: ber, ber })
            }
            m_order => {
                let m = self.bits_per_symbol() as f64;
                let symbol_snrs: Vec<f64> = bit_snrs.iter().map(|nu| m * nu).collect();
                let ser = analysis::sub_ser(m_order, &symbol_snrs).ok()?;
                Some(SubReference { ser, ber: ser / m })
            }
        }
    }

    /// Block-trial count for one point under the configured budget.
    pub fn trials_for(&self, sub: Option<&SubReference>) -> Result<u64> {
        match self.budget {
            TrialBudget::Fixed { count } => Ok(count.max(1)),
            TrialBudget::MinTrials { errors } => {
                let sub = sub.ok_or_else(|| {
                    Error::InvalidScenario(
                        "min-trials budget needs a computable single-user bound".into(),
                    )
                })?;
                let decisions = analysis::min_trials(sub.ser, errors)?;
                let per_trial = self.counted_symbols().len() as u64;
                Ok(decisions.div_ceil(per_trial).max(1))
            }
        }
    }
}

/// Analytic reference rates at one operating point.
#[derive(Debug, Clone, Copy)]
pub struct SubReference {
    pub ser: f64,
    pub ber: f64,
}

/// Which scenario knob a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepParameter {
    Omega,
    Phi1,
    Phi2,
    Vmax,
    #[serde(alias = "K", alias = "k")]
    Users,
    #[serde(alias = "EbN0", alias = "ebn0_db")]
    Ebn0,
}

impl SweepParameter {
    pub fn name(&self) -> &'static str {
        match self {
            SweepParameter::Omega => "omega",
            SweepParameter::Phi1 => "phi1",
            SweepParameter::Phi2 => "phi2",
            SweepParameter::Vmax => "vmax",
            SweepParameter::Users => "users",
            SweepParameter::Ebn0 => "ebn0",
        }
    }
}

/// A sweep as written in a config file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpecFile {
    pub scenario: String,
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
}

/// A validated sweep: a base scenario and the value grid. All grid cells
/// share the master seed, so channel, noise and symbol draws are common
/// random numbers and only the swept parameter changes.
#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub name: String,
    pub base: Scenario,
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
}

impl SweepSpec {
    pub fn new(
        name: String,
        base: Scenario,
        parameter: SweepParameter,
        values: Vec<f64>,
    ) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidConfig("sweep values must be non-empty".into()));
        }
        let spec = Self {
            name,
            base,
            parameter,
            values,
        };
        for &v in &spec.values {
            spec.apply(v)?;
        }
        Ok(spec)
    }

    /// The base scenario with one grid value applied.
    pub fn apply(&self, value: f64) -> Result<Scenario> {
        let mut s = self.base.clone();
        match self.parameter {
            SweepParameter::Omega => s.swarm.omega = value,
            SweepParameter::Phi1 => s.swarm.phi1 = value,
            SweepParameter::Phi2 => s.swarm.phi2 = value,
            SweepParameter::Vmax => {
                if !(value > 0.0) {
                    return Err(Error::InvalidConfig(format!("vmax grid value {value} must be positive")));
                }
                s.swarm.vmax = value;
            }
            SweepParameter::Users => {
                if value < 1.0 || value.fract() != 0.0 {
                    return Err(Error::InvalidConfig(format!(
                        "users grid value {value} must be a positive integer"
                    )));
                }
                s.users = value as usize;
                if let Some(nfr) = &s.nfr {
                    if nfr.strong_users.iter().any(|&k| k >= s.users) {
                        return Err(Error::InvalidConfig(
                            "users grid value breaks nfr.strong_users".into(),
                        ));
                    }
                }
            }
            SweepParameter::Ebn0 => s.ebn0_db = vec![value],
        }
        s.name = format!("{}@{}={}", self.base.name, self.parameter.name(), value);
        Ok(s)
    }
}
