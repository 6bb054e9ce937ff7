//! A small replicated comparison of the adaptive estimator with the
//! full-history and fixed-window baselines on the non-stationary scenarios.
//!
//!     MSBM_THREADS=4 cargo run --release --example nonstationary_benchmark -- 5

use armsbm::harness::{bench, ExperimentConfig};
use armsbm::model::ScenarioId;
use armsbm::pipeline::PolicyVariant;

fn main() -> armsbm::Result<()> {
    let reps = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(3);
    let cfg = ExperimentConfig {
        scenarios: ScenarioId::ALL[4..].to_vec(),
        policies: vec![
            PolicyVariant::Adaptive,
            PolicyVariant::FullHistory,
            PolicyVariant::FixedWindow(30),
            PolicyVariant::FixedWindow(20),
        ],
        reps,
        ..ExperimentConfig::default()
    };
    let res = bench(&cfg)?;
    print!("{}", res.table.summary_csv());

    let adaptive = res.trajectory("nonstat-1", PolicyVariant::Adaptive);
    println!("\nnonstat-1 adaptive median window:");
    for row in adaptive.iter().filter(|r| r.t % 25 == 0 || r.t == 110) {
        println!("  t = {:>3}: {}", row.t, row.k_hat_median);
    }
    Ok(())
}
