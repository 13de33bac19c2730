//! Result emission: CSV, gnuplot-style plot data and a JSON metadata
//! sidecar.
//!
//! The CSV schema (version header `# mudlab-results v1`) has one row per
//! (point, detector, iteration):
//!
//! ```text
//! scenario,ebn0_db,detector,iteration,ber,bit_errors,bits,trials,conf_low,conf_high,seed
//! ```
//!
//! `scenario` is a stable hash of the resolved scenario, `detector` is one
//! of `cd`, `pso` or `sub`, `iteration` is 0 for `cd`/`sub` and the swarm
//! round for `pso`, and the confidence columns are empty unless at least 100
//! bit errors were counted. Values depend only on the scenario and master
//! seed; the only non-reproducible output line is the `# generated=` header.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::analysis::ErrorStats;
use crate::harness::config::Scenario;
use crate::harness::runner::{PointReport, ScenarioReport, SweepReport};
use crate::{Error, Result};

/// Output flavor for [`emit_results`] and [`emit_sweep`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    PlotData,
}

impl std::str::FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "plotdata" => Ok(OutputFormat::PlotData),
            other => Err(Error::InvalidConfig(format!(
                "unknown format {other:?} (expected csv or plotdata)"
            ))),
        }
    }
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf29ce484222325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

/// Canonical serialized echo of a scenario, used for hashing and metadata.
#[derive(Serialize)]
struct CanonicalScenario<'a> {
    name: &'a str,
    constellation: &'a str,
    users: usize,
    gain: usize,
    symbols: usize,
    paths: usize,
    fingers: usize,
    antennas: usize,
    synchronous: bool,
    profile_delays: &'a [usize],
    profile_energies: &'a [f64],
    ebn0_db: &'a [f64],
    nfr: Option<(f64, &'a [usize])>,
    csi_error: (f64, f64),
    fading: &'static str,
    per_antenna_delays: bool,
    budget: String,
    master_seed: u64,
    detectors: (bool, bool),
    swarm: &'a crate::detectors::SwarmConfig,
}

fn canonical(s: &Scenario) -> String {
    let echo = CanonicalScenario {
        name: &s.name,
        constellation: s.constellation.name(),
        users: s.users,
        gain: s.gain,
        symbols: s.symbols,
        paths: s.paths,
        fingers: s.fingers,
        antennas: s.antennas,
        synchronous: s.synchronous,
        profile_delays: s.profile.delays(),
        profile_energies: s.profile.energies(),
        ebn0_db: &s.ebn0_db,
        nfr: s.nfr.as_ref().map(|n| (n.offset_db, n.strong_users.as_slice())),
        csi_error: s.csi_error,
        fading: match s.fading {
            crate::channel::FadingMode::Slow => "slow",
            crate::channel::FadingMode::PerSymbol => "per-symbol",
        },
        per_antenna_delays: s.per_antenna_delays,
        budget: format!("{:?}", s.budget),
        master_seed: s.master_seed,
        detectors: (s.run_cd, s.run_pso),
        swarm: &s.swarm,
    };
    serde_json::to_string(&echo).expect("scenario echo serializes")
}

/// Stable 16-hex-digit identifier of a resolved scenario.
pub fn scenario_hash(s: &Scenario) -> String {
    format!("{:016x}", fnv1a64(canonical(s).as_bytes()))
}

fn fmt_rate(x: f64) -> String {
    format!("{x:.6e}")
}

fn csv_row(
    out: &mut String,
    hash: &str,
    ebn0: f64,
    detector: &str,
    iteration: usize,
    stats: Option<&ErrorStats>,
    analytic: Option<f64>,
    seed: u64,
) {
    let (ber, errors, bits, trials, conf) = match stats {
        Some(st) => (
            st.ber(),
            st.bit_errors,
            st.total_bits(),
            st.trials,
            st.confidence(),
        ),
        None => (analytic.unwrap_or(0.0), 0, 0, 0, None),
    };
    let (lo, hi) = match conf {
        Some((lo, hi)) => (fmt_rate(lo), fmt_rate(hi)),
        None => (String::new(), String::new()),
    };
    writeln!(
        out,
        "{hash},{ebn0},{detector},{iteration},{},{errors},{bits},{trials},{lo},{hi},{seed}",
        fmt_rate(ber)
    )
    .expect("string writes cannot fail");
}

fn point_rows(out: &mut String, hash: &str, seed: u64, p: &PointReport) {
    if let Some(sub) = p.sub_ber {
        csv_row(out, hash, p.ebn0_db, "sub", 0, None, Some(sub), seed);
    }
    if let Some(cd) = &p.cd {
        csv_row(out, hash, p.ebn0_db, "cd", 0, Some(cd), None, seed);
    }
    if let Some(pso) = &p.pso {
        for (g, st) in pso.iter().enumerate() {
            csv_row(out, hash, p.ebn0_db, "pso", g, Some(st), None, seed);
        }
    }
}

fn timestamp() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn render_csv(report: &ScenarioReport) -> String {
    let hash = scenario_hash(&report.scenario);
    let seed = report.scenario.master_seed;
    let mut out = String::new();
    out.push_str("# mudlab-results v1\n");
    let _ = writeln!(out, "# scenario={} hash={hash} seed={seed}", report.scenario.name);
    let _ = writeln!(out, "# generated={}", timestamp());
    out.push_str(
        "scenario,ebn0_db,detector,iteration,ber,bit_errors,bits,trials,conf_low,conf_high,seed\n",
    );
    for p in &report.points {
        point_rows(&mut out, &hash, seed, p);
    }
    out
}

fn render_plotdata(report: &ScenarioReport) -> String {
    let hash = scenario_hash(&report.scenario);
    let seed = report.scenario.master_seed;
    let mut out = String::new();
    out.push_str("# mudlab-plotdata v1\n");
    let _ = writeln!(out, "# scenario={} hash={hash} seed={seed}", report.scenario.name);
    let _ = writeln!(out, "# generated={}", timestamp());

    // BER-versus-Eb/N0 curves, one index block per detector.
    let curve = |out: &mut String, name: &str, rows: Vec<(f64, f64, Option<(f64, f64)>)>| {
        if rows.is_empty() {
            return;
        }
        let _ = writeln!(out, "# curve detector={name}");
        for (x, y, conf) in rows {
            match conf {
                Some((lo, hi)) => {
                    let _ = writeln!(out, "{x} {} {} {}", fmt_rate(y), fmt_rate(lo), fmt_rate(hi));
                }
                None => {
                    let _ = writeln!(out, "{x} {}", fmt_rate(y));
                }
            }
        }
        out.push_str("\n\n");
    };
    curve(
        &mut out,
        "sub",
        report
            .points
            .iter()
            .filter_map(|p| p.sub_ber.map(|b| (p.ebn0_db, b, None)))
            .collect(),
    );
    curve(
        &mut out,
        "cd",
        report
            .points
            .iter()
            .filter_map(|p| p.cd.as_ref().map(|st| (p.ebn0_db, st.ber(), st.confidence())))
            .collect(),
    );
    curve(
        &mut out,
        "pso",
        report
            .points
            .iter()
            .filter_map(|p| {
                p.pso
                    .as_ref()
                    .and_then(|v| v.last())
                    .map(|st| (p.ebn0_db, st.ber(), st.confidence()))
            })
            .collect(),
    );

    // Convergence blocks: BER per swarm iteration at every point.
    for p in &report.points {
        if let Some(pso) = &p.pso {
            let _ = writeln!(out, "# curve convergence detector=pso ebn0={}", p.ebn0_db);
            for (g, st) in pso.iter().enumerate() {
                let _ = writeln!(out, "{g} {}", fmt_rate(st.ber()));
            }
            out.push_str("\n\n");
        }
    }
    out
}

#[derive(Serialize)]
struct PointMeta {
    ebn0_db: f64,
    trials: u64,
    sub_ber: Option<f64>,
    sub_ser: Option<f64>,
}

#[derive(Serialize)]
struct Metadata {
    schema: &'static str,
    version: &'static str,
    hash: String,
    scenario: serde_json::Value,
    points: Vec<PointMeta>,
    wall_time_s: Option<f64>,
}

fn render_metadata(report: &ScenarioReport, wall_time_s: Option<f64>) -> String {
    let meta = Metadata {
        schema: "mudlab-meta v1",
        version: env!("CARGO_PKG_VERSION"),
        hash: scenario_hash(&report.scenario),
        scenario: serde_json::from_str(&canonical(&report.scenario))
            .expect("canonical echo is valid JSON"),
        points: report
            .points
            .iter()
            .map(|p| PointMeta {
                ebn0_db: p.ebn0_db,
                trials: p.trials,
                sub_ber: p.sub_ber,
                sub_ser: p.sub_ser,
            })
            .collect(),
        wall_time_s,
    };
    serde_json::to_string_pretty(&meta).expect("metadata serializes")
}

fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Writes a scenario report (plus its metadata sidecar) into `out_dir` and
/// returns the created paths. Fails without writing anything when the report
/// is empty.
pub fn emit_results(
    report: &ScenarioReport,
    format: OutputFormat,
    out_dir: &Path,
    wall_time_s: Option<f64>,
) -> Result<Vec<PathBuf>> {
    if report.points.is_empty() {
        return Err(Error::EmptyReport);
    }
    fs::create_dir_all(out_dir).map_err(|source| Error::Io {
        path: out_dir.display().to_string(),
        source,
    })?;
    let stem = sanitize(&report.scenario.name);
    let (data_name, data) = match format {
        OutputFormat::Csv => (format!("{stem}.csv"), render_csv(report)),
        OutputFormat::PlotData => (format!("{stem}.plot"), render_plotdata(report)),
    };
    let data_path = out_dir.join(data_name);
    write_file(&data_path, &data)?;
    let meta_path = out_dir.join(format!("{stem}.meta.json"));
    write_file(&meta_path, &render_metadata(report, wall_time_s))?;
    Ok(vec![data_path, meta_path])
}

/// Writes a sweep report: one `(value, iteration, BER)` table, or plot-data
/// convergence blocks per grid value.
pub fn emit_sweep(
    report: &SweepReport,
    format: OutputFormat,
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    if report.cells.is_empty() || report.cells.iter().all(|c| c.report.points.is_empty()) {
        return Err(Error::EmptyReport);
    }
    fs::create_dir_all(out_dir).map_err(|source| Error::Io {
        path: out_dir.display().to_string(),
        source,
    })?;
    let stem = sanitize(&report.name);
    let mut out = String::new();
    let path = match format {
        OutputFormat::Csv => {
            out.push_str("# mudlab-sweep v1\n");
            let _ = writeln!(out, "# sweep={} parameter={}", report.name, report.parameter);
            let _ = writeln!(out, "# generated={}", timestamp());
            out.push_str(
                "parameter,value,scenario,ebn0_db,detector,iteration,ber,bit_errors,bits,trials,conf_low,conf_high,seed\n",
            );
            for cell in &report.cells {
                let hash = scenario_hash(&cell.report.scenario);
                let seed = cell.report.scenario.master_seed;
                for p in &cell.report.points {
                    let mut rows = String::new();
                    point_rows(&mut rows, &hash, seed, p);
                    for line in rows.lines() {
                        let _ = writeln!(out, "{},{},{line}", report.parameter, cell.value);
                    }
                }
            }
            out_dir.join(format!("{stem}.csv"))
        }
        OutputFormat::PlotData => {
            out.push_str("# mudlab-plotdata v1\n");
            let _ = writeln!(out, "# sweep={} parameter={}", report.name, report.parameter);
            let _ = writeln!(out, "# generated={}", timestamp());
            for cell in &report.cells {
                for p in &cell.report.points {
                    if let Some(pso) = &p.pso {
                        let _ = writeln!(
                            out,
                            "# curve convergence {}={} ebn0={}",
                            report.parameter, cell.value, p.ebn0_db
                        );
                        for (g, st) in pso.iter().enumerate() {
                            let _ = writeln!(out, "{g} {}", fmt_rate(st.ber()));
                        }
                        out.push_str("\n\n");
                    }
                }
            }
            out_dir.join(format!("{stem}.plot"))
        }
    };
    write_file(&path, &out)?;
    Ok(vec![path])
}
