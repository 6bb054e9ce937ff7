//! Calibrating the tolerance constant by parametric bootstrap, then checking
//! that a fresh stationary run keeps the full window.
//!
//!     cargo run --release --example calibrate -- 20

use armsbm::model::{simulate, InitRule, Membership, ParamSchedule, nonstationary_regime};
use armsbm::stats::GridStore;
use armsbm::window::{calibrate_ctau, select_window, CalibrationConfig, ToleranceRule};

fn main() -> armsbm::Result<()> {
    let bootstrap: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(20);
    let (n, t_train) = (30, 36);
    let z = Membership::balanced(n, 2)?;
    let schedule = ParamSchedule::constant(nonstationary_regime(1)?);
    let train = simulate(&z, &schedule, t_train, 11, InitRule::StationaryMarginal)?;

    let cfg = CalibrationConfig {
        grid_c: CalibrationConfig::default_grid(),
        t0: 16,
        alpha: 0.05,
        bootstrap,
        seed: 5,
    };
    let report = calibrate_ctau(&train[1..], &cfg)?;
    println!("C_tau = {:.4} from {bootstrap} bootstrap paths", report.c_tau);
    for (c, a) in report.acceptance.iter().filter(|(_, a)| *a > 0.0 && *a < 1.0) {
        println!("  c = {c:.4}: stable fraction {a:.2}");
    }

    let rule = ToleranceRule::new(report.c_tau)?;
    let mut kept = 0;
    let trials = 20;
    for trial in 0..trials {
        let path = simulate(&z, &schedule, t_train, 1000 + trial, InitRule::StationaryMarginal)?;
        let mut store = GridStore::new(n, 2);
        let mut full = true;
        for t in 1..=t_train {
            store.advance(&path[t - 1], &path[t])?;
            let d = select_window(&store, &rule, t_train)?;
            if t >= cfg.t0 && d.k_hat != d.largest_candidate() {
                full = false;
            }
        }
        kept += usize::from(full);
    }
    println!("fresh runs keeping the full window throughout: {kept}/{trials}");
    Ok(())
}
