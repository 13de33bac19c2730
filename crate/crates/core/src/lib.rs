//! DS-CDMA multiuser detection laboratory.
//!
//! The crate models the uplink of a direct-sequence CDMA system over slow
//! Rayleigh fading channels and provides three detectors for it: the
//! conventional Rake receiver with maximal-ratio combining, the optimum
//! (maximum-likelihood) joint detector by exhaustive search, and a binary
//! particle-swarm detector seeded by the conventional decision. A Monte Carlo
//! harness drives bit-error-rate scans and swarm-parameter sweeps and writes
//! CSV / plot data, with the analytic single-user bound as the reference
//! floor.
//!
//! Module map:
//!
//! * [`modem`] — constellations, Gray bit maps, real-alphabet decomposition.
//! * [`channel`] — power-delay profiles, Rayleigh realizations, estimation
//!   error model.
//! * [`airlink`] — spreading, chip-level synthesis, despreading, MRC,
//!   conventional decisions and cross-correlation structures.
//! * [`detectors`] — decoupled log-likelihood machinery, exhaustive optimum
//!   detector and the binary particle-swarm detector.
//! * [`analysis`] — single-user bounds, minimal trial counts, error
//!   statistics.
//! * [`harness`] — scenario configs, Monte Carlo runner, sweeps, emitters.

pub mod airlink;
pub mod analysis;
pub mod channel;
pub mod detectors;
mod error;
pub mod harness;
pub mod modem;

pub use error::{Error, Result};
