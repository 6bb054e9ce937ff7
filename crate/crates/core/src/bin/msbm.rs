//! `msbm`: simulate, estimate, bench, calibrate and ingest from the shell.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use armsbm::harness::{cmd_bench, cmd_calibrate, cmd_estimate, cmd_ingest, cmd_simulate, ExperimentConfig};
use armsbm::io::load_config;
use armsbm::Result;
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "msbm", version, about = "Dynamic multilayer block model toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario to a DMTS file.
    Simulate(Flags),
    /// Run estimators over one series and write per-time CSVs.
    Estimate(Flags),
    /// Monte Carlo benchmark over scenarios and policies.
    Bench(Flags),
    /// Calibrate the window-selection tolerance constant.
    Calibrate(Flags),
    /// Convert a (t, i, j, l) edge list to a DMTS file.
    Ingest(Flags),
}

/// Flags override values from `--config`.
#[derive(Args)]
struct Flags {
    /// Scenario id (stat-1..4, nonstat-1..4); repeatable.
    #[arg(long)]
    scenario: Vec<String>,
    /// Estimator (adaptive, stationary, full-history, fixed-K, static, aggregated); repeatable.
    #[arg(long)]
    policy: Vec<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    t_max: Option<usize>,
    #[arg(long)]
    layers: Option<usize>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    burn_in: Option<usize>,
    #[arg(long)]
    c_tau: Option<f64>,
    /// K,r1,r2
    #[arg(long)]
    ranks: Option<String>,
    #[arg(long)]
    bootstrap: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Calibration constants: `lo:hi:count` (log-spaced) or a comma list.
    #[arg(long)]
    grid: Option<String>,
    /// DMTS file, or the edge list for `ingest`.
    #[arg(long)]
    input: Option<PathBuf>,
    /// `label,index` file mapping node labels in an edge list.
    #[arg(long)]
    node_map: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// key=value file.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl Flags {
    fn into_config(self) -> Result<ExperimentConfig> {
        let mut map = match &self.config {
            Some(path) => load_config(path)?,
            None => BTreeMap::new(),
        };
        let mut set = |key: &str, value: Option<String>| {
            if let Some(v) = value {
                map.insert(key.to_owned(), v);
            }
        };
        let join = |v: Vec<String>| (!v.is_empty()).then(|| v.join(","));
        let path = |p: Option<PathBuf>| p.map(|p| p.display().to_string());
        set("scenario", join(self.scenario));
        set("policy", join(self.policy));
        set("n", self.n.map(|v| v.to_string()));
        set("t_max", self.t_max.map(|v| v.to_string()));
        set("layers", self.layers.map(|v| v.to_string()));
        set("reps", self.reps.map(|v| v.to_string()));
        set("seed", self.seed.map(|v| v.to_string()));
        set("burn_in", self.burn_in.map(|v| v.to_string()));
        set("c_tau", self.c_tau.map(|v| v.to_string()));
        set("ranks", self.ranks);
        set("bootstrap", self.bootstrap.map(|v| v.to_string()));
        set("alpha", self.alpha.map(|v| v.to_string()));
        set("grid", self.grid);
        set("input", path(self.input));
        set("node_map", path(self.node_map));
        set("out", path(self.out));
        ExperimentConfig::from_map(&map)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(f) => f.into_config().and_then(|c| cmd_simulate(&c)),
        Command::Estimate(f) => f.into_config().and_then(|c| cmd_estimate(&c)),
        Command::Bench(f) => f.into_config().and_then(|c| cmd_bench(&c)),
        Command::Calibrate(f) => f.into_config().and_then(|c| cmd_calibrate(&c)),
        Command::Ingest(f) => f.into_config().and_then(|c| cmd_ingest(&c)),
    };
    match result {
        Ok(report) => {
            print!("{report}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("msbm: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
