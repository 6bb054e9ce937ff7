//! Simulate a benchmark scenario, inspect it and store it as a DMTS file.
//!
//!     cargo run --release --example simulate -- nonstat-3 /tmp/nonstat-3.dmts

use armsbm::io::{load_dmts, save_dmts};
use armsbm::model::{make_scenario, stationary_marginal, ScenarioId, ScenarioSize};

fn main() -> armsbm::Result<()> {
    let mut args = std::env::args().skip(1);
    let id: ScenarioId = args.next().as_deref().unwrap_or("nonstat-1").parse()?;
    let out = args.next().unwrap_or_else(|| format!("{}/{id}.dmts", std::env::temp_dir().display()));

    let scenario = make_scenario(id, ScenarioSize::default())?;
    let snaps = scenario.simulate(42)?;
    println!(
        "{id}: n = {}, L = {}, T = {}, community sizes {:?}",
        snaps[0].n(),
        snaps[0].layers(),
        scenario.horizon,
        scenario.membership.sizes()
    );

    for t in [1, scenario.horizon / 2, scenario.horizon] {
        let (theta, delta) = scenario.truth_at(t)?;
        let pi = stationary_marginal(&theta, &delta)?;
        let a = &snaps[t];
        println!(
            "t = {t:>3}: Theta[0,1,0] = {:.3}, Delta[0,1,0] = {:.3}, marginal {:.3}, observed density {:.3}",
            theta.get(0, 1, 0),
            delta.get(0, 1, 0),
            pi.get(0, 1, 0),
            a.density()
        );
    }

    save_dmts(out.as_ref(), &snaps)?;
    let back = load_dmts(out.as_ref())?;
    assert_eq!(back, snaps);
    println!("stored {} snapshots in {out}", back.len());
    Ok(())
}
