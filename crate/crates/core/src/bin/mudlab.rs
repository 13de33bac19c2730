//! Monte Carlo CLI for the DS-CDMA multiuser detection lab.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use mudlab::harness::{
    emit_results, emit_sweep, run_scenario, run_sweep, ConfigFile, OutputFormat, TrialBudget,
};
use mudlab::{Error, Result};

#[derive(Parser)]
#[command(name = "mudlab", version, about = "DS-CDMA multiuser detection Monte Carlo lab")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// TOML config file with [scenario.*] and [sweep.*] sections.
    #[arg(long)]
    config: PathBuf,
    /// Master seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Fixed trial count override (replaces the configured budget).
    #[arg(long)]
    trials: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    /// Output format: csv or plotdata.
    #[arg(long, default_value = "csv")]
    format: String,
    /// Worker threads (default: all cores). Results do not depend on this.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario over its Eb/N0 grid.
    Run {
        #[command(flatten)]
        common: CommonArgs,
        /// Scenario name (optional when the config has exactly one).
        #[arg(long)]
        scenario: Option<String>,
    },
    /// Run a swarm-parameter sweep under common random numbers.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        /// Sweep name (optional when the config has exactly one).
        #[arg(long)]
        sweep: Option<String>,
    },
}

fn load_config(path: &PathBuf) -> Result<ConfigFile> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    ConfigFile::parse(&text)
}

fn with_pool<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> T {
    match jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .expect("thread pool builds")
            .install(f),
        None => f(),
    }
}

fn apply_overrides(
    scenario: &mut mudlab::harness::Scenario,
    seed: Option<u64>,
    trials: Option<u64>,
) {
    if let Some(seed) = seed {
        scenario.master_seed = seed;
    }
    if let Some(count) = trials {
        scenario.budget = TrialBudget::Fixed { count };
    }
}

fn print_warnings(warnings: &[String]) {
    for w in warnings {
        eprintln!("warning: {w}");
    }
}

fn fmt_opt_rate(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.3e}")).unwrap_or_else(|| "-".into())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { common, scenario } => {
            let format: OutputFormat = common.format.parse()?;
            let config = load_config(&common.config)?;
            let (mut s, warnings) = config.scenario(scenario.as_deref())?;
            print_warnings(&warnings);
            apply_overrides(&mut s, common.seed, common.trials);
            let start = Instant::now();
            let report = with_pool(common.jobs, || run_scenario(&s))?;
            let wall = start.elapsed().as_secs_f64();
            for p in &report.points {
                let cd = p.cd.as_ref().map(|st| st.ber());
                let pso = p.pso.as_ref().and_then(|v| v.last()).map(|st| st.ber());
                println!(
                    "ebn0={:>5} dB trials={:<8} cd={} pso={} sub={}",
                    p.ebn0_db,
                    p.trials,
                    fmt_opt_rate(cd),
                    fmt_opt_rate(pso),
                    fmt_opt_rate(p.sub_ber),
                );
            }
            let paths = emit_results(&report, format, &common.out_dir, Some(wall))?;
            for p in paths {
                println!("wrote {}", p.display());
            }
            Ok(())
        }
        Command::Sweep { common, sweep } => {
            let format: OutputFormat = common.format.parse()?;
            let config = load_config(&common.config)?;
            let (mut spec, warnings) = config.sweep(sweep.as_deref())?;
            print_warnings(&warnings);
            apply_overrides(&mut spec.base, common.seed, common.trials);
            let report = with_pool(common.jobs, || run_sweep(&spec))?;
            for cell in &report.cells {
                for p in &cell.report.points {
                    let pso = p.pso.as_ref().and_then(|v| v.last()).map(|st| st.ber());
                    println!(
                        "{}={:<8} ebn0={:>5} dB trials={:<8} pso={}",
                        report.parameter,
                        cell.value,
                        p.ebn0_db,
                        p.trials,
                        fmt_opt_rate(pso),
                    );
                }
            }
            let paths = emit_sweep(&report, format, &common.out_dir)?;
            for p in paths {
                println!("wrote {}", p.display());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                Error::InvalidConfig(_)
                | Error::InvalidScenario(_)
                | Error::InvalidProfile(_)
                | Error::UnsupportedOrder(_)
                | Error::ErrorBoundOutOfRange(_)
                | Error::TooManyFingers { .. } => ExitCode::from(1),
                _ => ExitCode::from(2),
            }
        }
    }
}
