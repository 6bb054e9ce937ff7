//! Online transition counts: the dynamic window grid, windowed estimates and
//! the bounded-memory fixed-window store.

use armsbm::model::{make_scenario, ScenarioId, ScenarioSize};
use armsbm::stats::{dynamic_grid, FixedWindowStore, GridStore};

fn main() -> armsbm::Result<()> {
    for t in [1, 2, 8, 16, 100, 175] {
        println!("grid at t = {t:>3}: {:?}", dynamic_grid(t)?);
    }

    let scenario = make_scenario(
        ScenarioId::NonStationary(1),
        ScenarioSize {
            n: Some(40),
            t_max: None,
        },
    )?;
    let snaps = scenario.simulate(7)?;
    let (n, layers) = (snaps[0].n(), snaps[0].layers());
    let mut grid = GridStore::new(n, layers);
    let mut fixed = FixedWindowStore::new(n, layers, 20)?;
    for t in 1..=120 {
        grid.advance(&snaps[t - 1], &snaps[t])?;
        fixed.advance(&snaps[t - 1], &snaps[t])?;
    }

    // Regime 1 holds until t = 50, regime 2 until t = 100, then regime 4.
    let (truth, _) = scenario.truth_at(120)?;
    println!("\nat t = 120, true within-block Theta = {:.3}", truth.get(0, 1, 0));
    println!("checkpoints kept: {:?}", grid.checkpoint_times());
    for k in grid.grid()? {
        let mle = grid.windowed_mle(k)?;
        println!(
            "  window {k:>3}: mean within-block Theta-hat {:.3}, degenerate entries {}",
            block_mean(&mle.theta, n),
            mle.degenerate_count()
        );
    }
    let w = fixed.window().mle();
    println!("fixed window {}: mean within-block Theta-hat {:.3}", w.k, block_mean(&w.theta, n));
    Ok(())
}

fn block_mean(theta: &armsbm::Tensor3, n: usize) -> f64 {
    let half = n / 2;
    let mut sum = 0.0;
    let mut count = 0.0;
    for i in 0..half {
        for j in (i + 1)..half {
            sum += theta.get(i, j, 0);
            count += 1.0;
        }
    }
    sum / count
}
