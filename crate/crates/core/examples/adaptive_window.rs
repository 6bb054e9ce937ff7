//! The stability scan picking the look-back window as the parameters change.

use armsbm::model::{make_scenario, ScenarioId, ScenarioSize};
use armsbm::stats::GridStore;
use armsbm::window::{select_window, tolerance, ToleranceRule};
use armsbm::harness::DEFAULT_C_TAU;

fn main() -> armsbm::Result<()> {
    let scenario = make_scenario(ScenarioId::NonStationary(1), ScenarioSize::default())?;
    let snaps = scenario.simulate(3)?;
    let rule = ToleranceRule::new(DEFAULT_C_TAU)?;
    let (n, layers) = (snaps[0].n(), snaps[0].layers());
    println!("tau(k) for C_tau = {DEFAULT_C_TAU}:");
    for k in [1, 8, 32, 128] {
        println!("  k = {k:>3}: {:.4}", tolerance(k, &rule, n, layers, scenario.horizon)?);
    }

    let mut store = GridStore::new(n, layers);
    println!("\n  t  k_hat  largest  stopped");
    for t in 1..=scenario.horizon {
        store.advance(&snaps[t - 1], &snaps[t])?;
        let d = select_window(&store, &rule, scenario.horizon)?;
        if t % 10 == 0 || (100..=120).contains(&t) && t % 2 == 0 {
            println!("{t:>3}  {:>5}  {:>7}  {}", d.k_hat, d.largest_candidate(), d.brk);
        }
    }
    Ok(())
}
