use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tinyarq_cli::{read_config, run_ccdf, run_compare, run_sweep, CliError, SweepSpec};

/// Selective-repeat ARQ with tiny codes: analysis, simulation and plots.
#[derive(Debug, Parser)]
#[command(name = "tinyarq", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// One CSV row per (protocol, eps, r, k, T), optional SVG plots.
    Sweep(Options),
    /// Delay CCDF of a single grid point with its sub-Gaussian bound.
    Ccdf(Options),
    /// Relative throughput gain of coded over uncoded ARQ.
    Compare(Options),
}

/// Every option can also be given in the `--config` file under the same name.
#[derive(Debug, Args)]
struct Options {
    /// `key = value` experiment file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Protocols (comma-separated): uncoded, harq, cf, coded.
    #[arg(long)]
    protocol: Option<String>,
    /// Erasure rates (comma-separated, strictly increasing).
    #[arg(long)]
    eps: Option<String>,
    /// Burst parameters and/or `memoryless` (comma-separated).
    #[arg(long)]
    r: Option<String>,
    /// Shorthand for `--r memoryless`.
    #[arg(long, conflicts_with = "r")]
    memoryless: bool,
    /// RTT values in slots (comma-separated).
    #[arg(long)]
    k: Option<String>,
    /// Timeout values in slots (comma-separated).
    #[arg(long = "T")]
    t: Option<String>,
    /// Explicit k:T pairs (comma-separated), replacing the k × T grid.
    #[arg(long)]
    pairs: Option<String>,
    /// Chase-combining α: a number or `10eps`.
    #[arg(long)]
    alpha: Option<String>,
    /// Simulated units per grid point.
    #[arg(long)]
    units: Option<String>,
    /// Base seed.
    #[arg(long)]
    seed: Option<String>,
    /// Simulation replications.
    #[arg(long)]
    replications: Option<String>,
    /// Analysis only.
    #[arg(long)]
    no_sim: bool,
    /// Output directory.
    #[arg(long)]
    out: Option<String>,
    /// Write SVG plots.
    #[arg(long)]
    plots: bool,
    /// Sweep only: also write a CCDF file per simulated row.
    #[arg(long)]
    ccdf: bool,
    /// Fill the `wallclock_ms` column (makes the CSV run-dependent).
    #[arg(long)]
    timing: bool,
}

impl Options {
    fn spec(&self) -> Result<SweepSpec, CliError> {
        let mut map = match &self.config {
            Some(path) => read_config(path)?,
            None => BTreeMap::new(),
        };
        let values = [
            ("protocol", &self.protocol),
            ("eps", &self.eps),
            ("r", &self.r),
            ("k", &self.k),
            ("T", &self.t),
            ("pairs", &self.pairs),
            ("alpha", &self.alpha),
            ("units", &self.units),
            ("seed", &self.seed),
            ("replications", &self.replications),
            ("out", &self.out),
        ];
        for (key, value) in values {
            if let Some(v) = value {
                map.insert(key.to_string(), v.clone());
            }
        }
        if self.memoryless {
            map.insert("r".into(), "memoryless".into());
        }
        let flags = [
            ("no-sim", self.no_sim),
            ("plots", self.plots),
            ("ccdf", self.ccdf),
            ("timing", self.timing),
        ];
        for (key, set) in flags {
            if set {
                map.insert(key.to_string(), "true".into());
            }
        }
        SweepSpec::from_map(&map)
    }
}

fn run(command: &Command) -> Result<(), CliError> {
    match command {
        Command::Sweep(o) => {
            let report = run_sweep(&o.spec()?)?;
            for w in &report.outputs.warnings {
                eprintln!("warning: {w}");
            }
            for p in report.outputs.csv.iter().chain(&report.outputs.svg) {
                println!("wrote {}", p.display());
            }
        }
        Command::Ccdf(o) => {
            let report = run_ccdf(&o.spec()?)?;
            for w in &report.outputs.warnings {
                eprintln!("warning: {w}");
            }
            if let Some(s) = &report.row.sim {
                if s.fit.valid {
                    println!("fitted v = {}", tinyarq_cli::format::float(s.fit.v));
                }
            }
            for p in report.outputs.csv.iter().chain(&report.outputs.svg) {
                println!("wrote {}", p.display());
            }
        }
        Command::Compare(o) => {
            let report = run_compare(&o.spec()?)?;
            println!("{}", report.summary);
            for p in &report.outputs.csv {
                println!("wrote {}", p.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
