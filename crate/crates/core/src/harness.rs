//! Monte Carlo experiment harness and the command implementations behind the
//! `msbm` binary.
//!
//! Every command reads an [`ExperimentConfig`], writes its files under
//! `out_dir` and returns a short human-readable [`CommandReport`]. Output is
//! a pure function of the configuration: replications run on a worker pool
//! but are reduced in a fixed order and written by one writer.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::community::switch_rate;
use crate::error::{Error, Result};
use crate::io::{load_dmts, parse_edge_list, save_dmts, NodeMap};
use crate::model::{
    make_scenario, nonstationary_regime, simulate, AdjacencySnapshot, InitRule, Membership, ParamSchedule, Scenario,
    ScenarioId, ScenarioSize,
};
use crate::pipeline::{run_with, EstimatorPolicy, Metrics, PolicyVariant, TruthSource};
use crate::spectral::RefineConfig;
use crate::window::{calibrate_ctau, CalibrationConfig, ToleranceRule};

/// Replications behind the published benchmark tables.
pub const REFERENCE_REPS: usize = 50;

/// Tolerance constant used when none is configured: the value returned by
/// [`calibrate_ctau`] with 50 bootstrap paths of length 300 on the first
/// non-stationary regime at `n = 100`.
pub const DEFAULT_C_TAU: f64 = 0.2759;

/// Settings shared by all commands. Unset sizes fall back to the scenario
/// defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub scenarios: Vec<ScenarioId>,
    /// DMTS file (estimate, calibrate) or edge list (ingest).
    pub input: Option<PathBuf>,
    pub policies: Vec<PolicyVariant>,
    pub reps: usize,
    pub seed: u64,
    pub n: Option<usize>,
    pub t_max: Option<usize>,
    pub layers: Option<usize>,
    pub out_dir: PathBuf,
    /// Metrics are averaged over `t > burn_in`; calibration requires the full
    /// window from `t = burn_in + 1` on. Must be below `T` where used.
    pub burn_in: usize,
    pub c_tau: f64,
    pub ranks: (usize, usize, usize),
    pub bootstrap: usize,
    pub alpha: f64,
    /// Candidate tolerance constants for calibration, ascending.
    pub grid_c: Vec<f64>,
    pub node_map: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            scenarios: Vec::new(),
            input: None,
            policies: Vec::new(),
            reps: 20,
            seed: 1,
            n: None,
            t_max: None,
            layers: None,
            out_dir: PathBuf::from("out"),
            burn_in: 15,
            c_tau: DEFAULT_C_TAU,
            ranks: (2, 2, 2),
            bootstrap: 50,
            alpha: 0.05,
            grid_c: CalibrationConfig::default_grid(),
            node_map: None,
        }
    }
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::usage(format!("invalid value '{value}' for '{key}'")))
}

fn parse_list<T: std::str::FromStr<Err = Error>>(value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::parse)
        .collect()
}

/// Parses `K,r1,r2`.
pub fn parse_ranks(value: &str) -> Result<(usize, usize, usize)> {
    let parts: Vec<usize> = value
        .split(',')
        .map(|p| parse_value("ranks", p))
        .collect::<Result<_>>()?;
    match parts.as_slice() {
        &[k, r1, r2] => Ok((k, r1, r2)),
        _ => Err(Error::usage(format!("ranks must be K,r1,r2, got '{value}'"))),
    }
}

/// Parses a calibration grid: either `lo:hi:count` for `count` log-spaced
/// constants from `lo` to `hi`, or an explicit comma-separated list.
pub fn parse_grid(value: &str) -> Result<Vec<f64>> {
    let bad = || Error::usage(format!("invalid calibration grid '{value}'"));
    let grid: Vec<f64> = if let [lo, hi, count] = value.split(':').collect::<Vec<_>>()[..] {
        let (lo, hi): (f64, f64) = (parse_value("grid", lo)?, parse_value("grid", hi)?);
        let count: usize = parse_value("grid", count)?;
        if !(lo > 0.0 && hi > lo) || count < 2 {
            return Err(bad());
        }
        let step = (hi / lo).ln() / (count - 1) as f64;
        (0..count).map(|i| lo * (step * i as f64).exp()).collect()
    } else {
        value
            .split(',')
            .map(|v| parse_value("grid", v))
            .collect::<Result<_>>()?
    };
    if grid.is_empty() || grid.iter().any(|&c| !(c > 0.0)) || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(bad());
    }
    Ok(grid)
}

impl ExperimentConfig {
    /// Builds a configuration from `key=value` pairs on top of the defaults.
    /// List keys (`scenario`, `policy`) take comma-separated values.
    pub fn from_map(map: &BTreeMap<String, String>) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        for (key, value) in map {
            match key.as_str() {
                "scenario" | "scenarios" => cfg.scenarios = parse_list(value)?,
                "policy" | "policies" => cfg.policies = parse_list(value)?,
                "input" => cfg.input = Some(PathBuf::from(value)),
                "node_map" | "node-map" => cfg.node_map = Some(PathBuf::from(value)),
                "out" | "out_dir" => cfg.out_dir = PathBuf::from(value),
                "reps" => cfg.reps = parse_value(key, value)?,
                "seed" => cfg.seed = parse_value(key, value)?,
                "n" => cfg.n = Some(parse_value(key, value)?),
                "t_max" | "t-max" => cfg.t_max = Some(parse_value(key, value)?),
                "layers" => cfg.layers = Some(parse_value(key, value)?),
                "burn_in" | "burn-in" => cfg.burn_in = parse_value(key, value)?,
                "c_tau" | "c-tau" => cfg.c_tau = parse_value(key, value)?,
                "ranks" => cfg.ranks = parse_ranks(value)?,
                "bootstrap" => cfg.bootstrap = parse_value(key, value)?,
                "alpha" => cfg.alpha = parse_value(key, value)?,
                "grid" | "grid_c" => cfg.grid_c = parse_grid(value)?,
                other => return Err(Error::usage(format!("unknown configuration key '{other}'"))),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(Error::usage("reps must be at least 1"));
        }
        if !(self.c_tau > 0.0) {
            return Err(Error::usage(format!("C_tau must be positive, got {}", self.c_tau)));
        }
        let (k, r1, r2) = self.ranks;
        if k == 0 || r1 == 0 || r2 == 0 {
            return Err(Error::usage("ranks must be positive"));
        }
        Ok(())
    }

    pub fn refine(&self) -> RefineConfig {
        let (k, r1, r2) = self.ranks;
        RefineConfig::new(k, r1, r2)
    }

    pub fn size(&self) -> ScenarioSize {
        ScenarioSize {
            n: self.n,
            t_max: self.t_max,
        }
    }

    /// The estimator for `variant` on a series of length `horizon`.
    pub fn policy(&self, variant: PolicyVariant, horizon: usize, seed: u64) -> Result<EstimatorPolicy> {
        Ok(EstimatorPolicy::new(variant, self.refine(), horizon)
            .with_tolerance(ToleranceRule::new(self.c_tau)?)
            .with_seed(seed))
    }

    fn scenarios_or(&self, default: &[ScenarioId]) -> Vec<ScenarioId> {
        if self.scenarios.is_empty() {
            default.to_vec()
        } else {
            self.scenarios.clone()
        }
    }

    fn policies_or(&self, default: &[PolicyVariant]) -> Vec<PolicyVariant> {
        if self.policies.is_empty() {
            default.to_vec()
        } else {
            self.policies.clone()
        }
    }

    fn single_scenario(&self) -> Result<ScenarioId> {
        match self.scenarios.as_slice() {
            [] => Ok(ScenarioId::NonStationary(1)),
            [one] => Ok(*one),
            _ => Err(Error::usage("this command takes a single scenario")),
        }
    }
}

/// Seed of replication `rep`; replication 0 uses `seed` itself.
pub fn replicate_seed(seed: u64, rep: usize) -> u64 {
    seed.wrapping_add((rep as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Worker count: `MSBM_THREADS` if set, else all cores.
pub fn worker_threads() -> usize {
    std::env::var("MSBM_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&v| v >= 1)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn with_pool<T: Send>(f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(worker_threads())
        .build()
        .map_err(|e| Error::Numerical(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}

/// Mean and sample standard deviation (divisor `R - 1`; zero for `R = 1`).
pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    let r = values.len();
    if r == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / r as f64;
    if r == 1 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    (mean, (ss / (r - 1) as f64).sqrt())
}

/// Post-burn-in averages of one replication of one policy.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateRow {
    pub scenario: String,
    pub policy: PolicyVariant,
    pub rep: usize,
    pub err_theta: Option<f64>,
    pub err_delta: Option<f64>,
    pub err_z: f64,
}

/// Aggregate of one metric over replications.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub scenario: String,
    pub policy: PolicyVariant,
    pub metric: &'static str,
    pub mean: f64,
    pub sd: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricsTable {
    pub rows: Vec<ReplicateRow>,
}

impl MetricsTable {
    /// Mean and standard deviation per `(scenario, policy, metric)`, in
    /// first-appearance order.
    pub fn summary(&self) -> Vec<SummaryRow> {
        let mut keys: Vec<(String, PolicyVariant)> = Vec::new();
        for row in &self.rows {
            let key = (row.scenario.clone(), row.policy);
            if !keys.contains(&key) {
                keys.push(key);
            }
        }
        let mut out = Vec::new();
        for (scenario, policy) in keys {
            let rows: Vec<&ReplicateRow> = self
                .rows
                .iter()
                .filter(|r| r.scenario == scenario && r.policy == policy)
                .collect();
            let metrics: [(&'static str, Vec<Option<f64>>); 3] = [
                ("err_theta", rows.iter().map(|r| r.err_theta).collect()),
                ("err_delta", rows.iter().map(|r| r.err_delta).collect()),
                ("err_z", rows.iter().map(|r| Some(r.err_z)).collect()),
            ];
            for (metric, values) in metrics {
                let values: Option<Vec<f64>> = values.into_iter().collect();
                if let Some(values) = values {
                    let (mean, sd) = mean_sd(&values);
                    out.push(SummaryRow {
                        scenario: scenario.clone(),
                        policy,
                        metric,
                        mean,
                        sd,
                    });
                }
            }
        }
        out
    }

    pub fn get(&self, scenario: &str, policy: PolicyVariant, metric: &str) -> Option<SummaryRow> {
        self.summary()
            .into_iter()
            .find(|s| s.scenario == scenario && s.policy == policy && s.metric == metric)
    }

    pub fn summary_csv(&self) -> String {
        let mut s = String::from("scenario,policy,metric,mean,sd\n");
        for row in self.summary() {
            let _ = writeln!(s, "{},{},{},{:.6},{:.6}", row.scenario, row.policy, row.metric, row.mean, row.sd);
        }
        s
    }

    pub fn replicates_csv(&self) -> String {
        let mut s = String::from("scenario,policy,rep,err_theta,err_delta,err_z\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{:.6}",
                r.scenario,
                r.policy,
                r.rep,
                fmt_opt(r.err_theta),
                fmt_opt(r.err_delta),
                r.err_z
            );
        }
        s
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_owned(), |v| format!("{v:.6}"))
}

/// Per-time averages over replications, for plotting.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRow {
    pub scenario: String,
    pub policy: PolicyVariant,
    pub t: usize,
    pub err_theta: Option<f64>,
    pub err_delta: Option<f64>,
    pub err_z: f64,
    /// Median over replications (lower median for even counts).
    pub k_hat_median: usize,
}

pub fn trajectory_csv(rows: &[TrajectoryRow]) -> String {
    let mut s = String::from("scenario,policy,t,err_theta,err_delta,err_z,k_hat_median\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{:.6},{}",
            r.scenario,
            r.policy,
            r.t,
            fmt_opt(r.err_theta),
            fmt_opt(r.err_delta),
            r.err_z,
            r.k_hat_median
        );
    }
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchResult {
    pub table: MetricsTable,
    pub trajectories: Vec<TrajectoryRow>,
}

impl BenchResult {
    pub fn trajectory(&self, scenario: &str, policy: PolicyVariant) -> Vec<&TrajectoryRow> {
        self.trajectories
            .iter()
            .filter(|r| r.scenario == scenario && r.policy == policy)
            .collect()
    }
}

/// Runs every policy on one simulated replication and returns the
/// per-time metrics of each.
pub fn run_replicate(
    scenario: &Scenario,
    policies: &[PolicyVariant],
    cfg: &ExperimentConfig,
    seed: u64,
) -> Result<Vec<Vec<Metrics>>> {
    let snaps = scenario.simulate(seed)?;
    policies
        .iter()
        .map(|&v| {
            let policy = cfg.policy(v, scenario.horizon, seed)?;
            let mut metrics = Vec::with_capacity(scenario.horizon);
            run_with(&snaps, &policy, Some(scenario as &dyn TruthSource), |_, m| {
                metrics.push(m.expect("truth supplied"));
                Ok(())
            })?;
            Ok(metrics)
        })
        .collect()
}

fn post_burn_in_mean(metrics: &[Metrics], burn_in: usize, f: impl Fn(&Metrics) -> Option<f64>) -> Option<f64> {
    let vals: Option<Vec<f64>> = metrics.iter().filter(|m| m.t > burn_in).map(f).collect();
    let vals = vals?;
    (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
}

/// Monte Carlo benchmark over the configured scenarios and policies. Each
/// replication's data set is shared by all policies.
pub fn bench(cfg: &ExperimentConfig) -> Result<BenchResult> {
    cfg.validate()?;
    let scenarios = cfg.scenarios_or(&ScenarioId::ALL[4..]);
    let policies = cfg.policies_or(&[
        PolicyVariant::Adaptive,
        PolicyVariant::FullHistory,
        PolicyVariant::FixedWindow(30),
        PolicyVariant::FixedWindow(20),
    ]);
    let built: Vec<Scenario> = scenarios
        .iter()
        .map(|&id| make_scenario(id, cfg.size()))
        .collect::<Result<_>>()?;
    for sc in &built {
        if cfg.burn_in >= sc.horizon {
            return Err(Error::usage(format!(
                "burn-in {} must be below T = {}",
                cfg.burn_in, sc.horizon
            )));
        }
    }
    let jobs: Vec<(usize, usize)> = (0..built.len())
        .flat_map(|s| (0..cfg.reps).map(move |r| (s, r)))
        .collect();
    let runs: Vec<Vec<Vec<Metrics>>> = with_pool(|| {
        jobs.par_iter()
            .map(|&(s, r)| run_replicate(&built[s], &policies, cfg, replicate_seed(cfg.seed, r)))
            .collect::<Result<Vec<_>>>()
    })??;

    let mut table = MetricsTable::default();
    let mut trajectories = Vec::new();
    for (s, sc) in built.iter().enumerate() {
        let name = sc.id.to_string();
        let reps = &runs[s * cfg.reps..(s + 1) * cfg.reps];
        for (p, &policy) in policies.iter().enumerate() {
            for (rep, run) in reps.iter().enumerate() {
                let m = &run[p];
                table.rows.push(ReplicateRow {
                    scenario: name.clone(),
                    policy,
                    rep,
                    err_theta: post_burn_in_mean(m, cfg.burn_in, |m| m.err_theta),
                    err_delta: post_burn_in_mean(m, cfg.burn_in, |m| m.err_delta),
                    err_z: post_burn_in_mean(m, cfg.burn_in, |m| Some(m.err_z)).unwrap_or(f64::NAN),
                });
            }
            for t_idx in 0..sc.horizon {
                let at: Vec<&Metrics> = reps.iter().map(|run| &run[p][t_idx]).collect();
                let mean = |f: &dyn Fn(&Metrics) -> Option<f64>| {
                    let v: Option<Vec<f64>> = at.iter().map(|m| f(m)).collect();
                    v.map(|v| v.iter().sum::<f64>() / v.len() as f64)
                };
                let mut ks: Vec<usize> = at.iter().map(|m| m.k_hat).collect();
                ks.sort_unstable();
                trajectories.push(TrajectoryRow {
                    scenario: name.clone(),
                    policy,
                    t: t_idx + 1,
                    err_theta: mean(&|m| m.err_theta),
                    err_delta: mean(&|m| m.err_delta),
                    err_z: mean(&|m| Some(m.err_z)).unwrap_or(f64::NAN),
                    k_hat_median: ks[(ks.len() - 1) / 2],
                });
            }
        }
    }
    Ok(BenchResult { table, trajectories })
}

/// Summary lines and the files a command wrote.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CommandReport {
    pub lines: Vec<String>,
    pub files: Vec<PathBuf>,
}

impl fmt::Display for CommandReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for line in &self.lines {
            writeln!(f, "{line}")?;
        }
        for file in &self.files {
            writeln!(f, "wrote {}", file.display())?;
        }
        Ok(())
    }
}

impl CommandReport {
    fn write(&mut self, path: PathBuf, contents: &str) -> Result<()> {
        let mut w = BufWriter::new(File::create(&path)?);
        w.write_all(contents.as_bytes())?;
        w.flush()?;
        self.files.push(path);
        Ok(())
    }
}

fn prepare_out(cfg: &ExperimentConfig) -> Result<&Path> {
    fs::create_dir_all(&cfg.out_dir)?;
    Ok(&cfg.out_dir)
}

fn describe(snaps: &[AdjacencySnapshot]) -> String {
    let density = snaps.iter().map(AdjacencySnapshot::density).sum::<f64>() / snaps.len().max(1) as f64;
    let (n, layers) = snaps.first().map_or((0, 0), |a| (a.n(), a.layers()));
    format!(
        "n = {n}, L = {layers}, T = {} snapshots, mean density {density:.4}",
        snaps.len()
    )
}

/// Simulates one scenario and stores `A^0, ..., A^T` as a DMTS file.
pub fn cmd_simulate(cfg: &ExperimentConfig) -> Result<CommandReport> {
    cfg.validate()?;
    let id = cfg.single_scenario()?;
    let sc = make_scenario(id, cfg.size())?;
    let snaps = sc.simulate(cfg.seed)?;
    let out = prepare_out(cfg)?.join(format!("{id}.dmts"));
    save_dmts(&out, &snaps)?;
    Ok(CommandReport {
        lines: vec![format!("{id} seed {}: {}", cfg.seed, describe(&snaps))],
        files: vec![out],
    })
}

/// Runs each policy over one series and writes a per-time CSV per policy.
/// Error columns appear only for simulated input, where the truth is known.
pub fn cmd_estimate(cfg: &ExperimentConfig) -> Result<CommandReport> {
    cfg.validate()?;
    let (snaps, truth) = match &cfg.input {
        Some(path) => (load_dmts(path)?, None),
        None => {
            let sc = make_scenario(cfg.single_scenario()?, cfg.size())?;
            (sc.simulate(cfg.seed)?, Some(sc))
        }
    };
    if snaps.len() < 2 {
        return Err(Error::usage("estimation needs an initial snapshot and at least one more"));
    }
    let horizon = snaps.len() - 1;
    if cfg.burn_in >= horizon {
        return Err(Error::usage(format!("burn-in {} must be below T = {horizon}", cfg.burn_in)));
    }
    let dir = prepare_out(cfg)?.to_path_buf();
    let mut report = CommandReport::default();
    report.lines.push(describe(&snaps));
    for variant in cfg.policies_or(&[PolicyVariant::Adaptive]) {
        let policy = cfg.policy(variant, horizon, cfg.seed)?;
        let mut csv = String::from("t,k_hat,degenerate,refreshed,switch_rate,sizes");
        if truth.is_some() {
            csv.push_str(",err_theta,err_delta,err_z");
        }
        csv.push('\n');
        let mut prev: Option<Membership> = None;
        let mut metrics = Vec::new();
        let truth_ref = truth.as_ref().map(|s| s as &dyn TruthSource);
        run_with(&snaps, &policy, truth_ref, |b, m| {
            let switch = prev.as_ref().map(|p| switch_rate(p, &b.z_hat)).transpose()?;
            let sizes: Vec<String> = b.z_hat.sizes().iter().map(usize::to_string).collect();
            let _ = write!(
                csv,
                "{},{},{},{},{},{}",
                b.t,
                b.k_hat,
                b.degenerate,
                u8::from(b.refreshed),
                fmt_opt(switch),
                sizes.join(";")
            );
            if let Some(m) = m {
                let _ = write!(csv, ",{},{},{:.6}", fmt_opt(m.err_theta), fmt_opt(m.err_delta), m.err_z);
                metrics.push(m);
            }
            csv.push('\n');
            prev = Some(b.z_hat);
            Ok(())
        })?;
        let mut line = format!("{variant}: {horizon} steps");
        if truth.is_some() {
            let f = |g: &dyn Fn(&Metrics) -> Option<f64>| fmt_opt(post_burn_in_mean(&metrics, cfg.burn_in, g));
            let _ = write!(
                line,
                ", post-burn-in mean err_theta {} err_delta {} err_z {}",
                f(&|m| m.err_theta),
                f(&|m| m.err_delta),
                f(&|m| Some(m.err_z))
            );
        }
        report.lines.push(line);
        report.write(dir.join(format!("estimate-{variant}.csv")), &csv)?;
    }
    Ok(report)
}

/// Replicated benchmark: summary table, per-replication table, per-time
/// trajectories and run metadata.
pub fn cmd_bench(cfg: &ExperimentConfig) -> Result<CommandReport> {
    let result = bench(cfg)?;
    let dir = prepare_out(cfg)?.to_path_buf();
    let mut report = CommandReport::default();
    for row in result.table.summary() {
        report.lines.push(format!(
            "{:<10} {:<13} {:<9} {:.4} ({:.4})",
            row.scenario, row.policy, row.metric, row.mean, row.sd
        ));
    }
    let mut meta = String::new();
    let scenarios: Vec<String> = cfg
        .scenarios_or(&ScenarioId::ALL[4..])
        .iter()
        .map(ToString::to_string)
        .collect();
    let _ = writeln!(meta, "scenarios={}", scenarios.join(","));
    let _ = writeln!(meta, "reps={}", cfg.reps);
    let _ = writeln!(meta, "reference_reps={REFERENCE_REPS}");
    let _ = writeln!(meta, "reps_scale={:.4}", cfg.reps as f64 / REFERENCE_REPS as f64);
    let _ = writeln!(meta, "seed={}", cfg.seed);
    let _ = writeln!(meta, "n={}", cfg.n.map_or("default".into(), |v| v.to_string()));
    let _ = writeln!(meta, "t_max={}", cfg.t_max.map_or("default".into(), |v| v.to_string()));
    let _ = writeln!(meta, "burn_in={}", cfg.burn_in);
    let _ = writeln!(meta, "c_tau={}", cfg.c_tau);
    let _ = writeln!(meta, "ranks={},{},{}", cfg.ranks.0, cfg.ranks.1, cfg.ranks.2);
    report.write(dir.join("metrics.csv"), &result.table.summary_csv())?;
    report.write(dir.join("replicates.csv"), &result.table.replicates_csv())?;
    report.write(dir.join("trajectory.csv"), &trajectory_csv(&result.trajectories))?;
    report.write(dir.join("metadata.txt"), &meta)?;
    Ok(report)
}

/// Stationary training series for calibration: the input file without its
/// initial snapshot, or a fresh simulation of the first non-stationary
/// regime held fixed.
fn training_series(cfg: &ExperimentConfig) -> Result<Vec<AdjacencySnapshot>> {
    let mut snaps = match &cfg.input {
        Some(path) => load_dmts(path)?,
        None => {
            let n = cfg.n.unwrap_or(100);
            let t = cfg.t_max.unwrap_or(300);
            let z = Membership::balanced(n, 2)?;
            let schedule = ParamSchedule::constant(nonstationary_regime(1)?);
            simulate(&z, &schedule, t, cfg.seed, InitRule::StationaryMarginal)?
        }
    };
    if snaps.is_empty() {
        return Err(Error::usage("empty training series"));
    }
    snaps.remove(0);
    Ok(snaps)
}

/// Calibrates the tolerance constant and writes the acceptance curve and
/// bootstrap thresholds.
pub fn cmd_calibrate(cfg: &ExperimentConfig) -> Result<CommandReport> {
    cfg.validate()?;
    let train = training_series(cfg)?;
    let cal = CalibrationConfig {
        grid_c: cfg.grid_c.clone(),
        t0: cfg.burn_in + 1,
        alpha: cfg.alpha,
        bootstrap: cfg.bootstrap,
        seed: cfg.seed,
    };
    let rep = with_pool(|| calibrate_ctau(&train, &cal))??;
    let dir = prepare_out(cfg)?.to_path_buf();
    let mut report = CommandReport::default();
    let mut sorted = rep.thresholds.clone();
    sorted.sort_by(f64::total_cmp);
    report.lines.push(format!(
        "C_tau = {:.6} (alpha {}, B = {}, T_train = {}); bootstrap thresholds min {:.4} median {:.4} max {:.4}",
        rep.c_tau,
        cfg.alpha,
        cfg.bootstrap,
        train.len(),
        sorted[0],
        sorted[(sorted.len() - 1) / 2],
        sorted[sorted.len() - 1]
    ));
    let mut curve = String::from("c,acceptance\n");
    for (c, a) in &rep.acceptance {
        let _ = writeln!(curve, "{c:.6},{a:.4}");
    }
    let mut th = String::from("path,threshold\n");
    for (b, x) in rep.thresholds.iter().enumerate() {
        let _ = writeln!(th, "{},{x:.6}", b + 1);
    }
    report.write(dir.join("calibration.csv"), &curve)?;
    report.write(dir.join("thresholds.csv"), &th)?;
    report.write(dir.join("c_tau.txt"), &format!("c_tau={:.6}\n", rep.c_tau))?;
    Ok(report)
}

/// Converts a `(t, i, j, l)` edge list into a DMTS file.
pub fn cmd_ingest(cfg: &ExperimentConfig) -> Result<CommandReport> {
    cfg.validate()?;
    let input = cfg.input.as_ref().ok_or_else(|| Error::usage("ingest needs --input"))?;
    let (Some(n), Some(layers), Some(t_max)) = (cfg.n, cfg.layers, cfg.t_max) else {
        return Err(Error::usage("ingest needs --n, --layers and --t-max"));
    };
    let map = cfg
        .node_map
        .as_ref()
        .map(|p| NodeMap::parse(BufReader::new(File::open(p)?)))
        .transpose()?;
    let snaps = parse_edge_list(BufReader::new(File::open(input)?), n, layers, t_max, map.as_ref())?;
    let stem = input.file_stem().and_then(|s| s.to_str()).unwrap_or("ingested");
    let out = prepare_out(cfg)?.join(format!("{stem}.dmts"));
    save_dmts(&out, &snaps)?;
    Ok(CommandReport {
        lines: vec![describe(&snaps)],
        files: vec![out],
    })
}
