mod common;

use armsbm::stats::{dynamic_grid, FixedWindowStore, GridStore, DEGENERATE_ESTIMATE};
use common::{random_series, raw_mle, recount};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn windowed_mle_matches_recount(seed in any::<u64>(), n in 2usize..6, layers in 1usize..3, t_max in 1usize..40) {
        let snaps = random_series(seed, n, layers, t_max);
        let mut store = GridStore::new(n, layers);
        for t in 1..=t_max {
            store.advance(&snaps[t - 1], &snaps[t]).unwrap();
            for k in dynamic_grid(t).unwrap().into_iter().chain([t]) {
                let est = store.windowed_mle(k).unwrap();
                for i in 0..n {
                    for j in 0..n {
                        if i == j {
                            continue;
                        }
                        for l in 0..layers {
                            let idx = (i * n + j) * layers + l;
                            let (th, de) = raw_mle(recount(&snaps, t, k, i, j, l));
                            prop_assert_eq!(est.theta_degenerate[idx], th.is_none());
                            prop_assert_eq!(est.delta_degenerate[idx], de.is_none());
                            prop_assert!((est.theta.get(i, j, l) - th.unwrap_or(DEGENERATE_ESTIMATE)).abs() <= 1e-12);
                            prop_assert!((est.delta.get(i, j, l) - de.unwrap_or(DEGENERATE_ESTIMATE)).abs() <= 1e-12);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn fixed_window_matches_recount(seed in any::<u64>(), lag in 1usize..12, t_max in 1usize..30) {
        let (n, layers) = (4, 2);
        let snaps = random_series(seed, n, layers, t_max);
        let mut store = FixedWindowStore::new(n, layers, lag).unwrap();
        for t in 1..=t_max {
            store.advance(&snaps[t - 1], &snaps[t]).unwrap();
            let w = store.window();
            prop_assert_eq!(w.k, lag.min(t));
            for i in 0..n {
                for j in 0..n {
                    if i == j {
                        continue;
                    }
                    for l in 0..layers {
                        let idx = (i * n + j) * layers + l;
                        let c = recount(&snaps, t, lag.min(t), i, j, l);
                        prop_assert_eq!([w.c01[idx], w.c00[idx], w.c10[idx], w.c11[idx]], c);
                    }
                }
            }
        }
    }

    #[test]
    fn grid_starts_points_are_inherited(t in 1usize..5000) {
        let now = dynamic_grid(t).unwrap();
        let next = dynamic_grid(t + 1).unwrap();
        let starts: Vec<usize> = now.iter().map(|k| t - k).chain([t]).collect();
        for k in &next {
            prop_assert!(starts.contains(&(t + 1 - k)), "start {} at t = {} not kept", t + 1 - k, t + 1);
        }
        prop_assert!(now.windows(2).all(|w| w[0] < w[1]));
        prop_assert_eq!(now[0], 1);
        prop_assert!(*now.last().unwrap() <= t);
    }
}

#[test]
fn grid_is_logarithmic() {
    assert_eq!(dynamic_grid(8).unwrap(), vec![1, 2, 3, 5]);
    for t in [10usize, 100, 1000, 10_000, 100_000] {
        let len = dynamic_grid(t).unwrap().len() as f64;
        assert!(len <= 2.0 * (t as f64).log2() + 1.0, "grid at {t} has {len} entries");
    }
}
