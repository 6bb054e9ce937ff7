//! Online sufficient statistics for the transition MLEs.
//!
//! For every edge we keep three running counts up to time `t`:
//! `N01` (0 -> 1 transitions), `N10` (1 -> 0 transitions) and `N` (number
//! of steps whose predecessor state was 1). Any window `(t - k, t]` is the
//! difference of two such snapshots, so the closed-form MLEs over that window
//! need only the counts at `t` and `t - k`. [`GridStore`] keeps the counts
//! for the logarithmic set of look-back lengths from [`dynamic_grid`].

use std::collections::{BTreeMap, VecDeque};

use crate::error::{Error, Result};
use crate::model::AdjacencySnapshot;
use crate::tensor::Tensor3;

/// Value reported for an MLE whose denominator is zero within the window,
/// the `0 / 0 = 0` reading of the count ratio.
pub const DEGENERATE_ESTIMATE: f64 = 0.0;

/// Cumulative transition counts up to time `t`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuffStats {
    t: usize,
    n: usize,
    layers: usize,
    n01: Vec<u32>,
    n10: Vec<u32>,
    nact: Vec<u32>,
}

impl SuffStats {
    pub fn zeros(n: usize, layers: usize) -> Self {
        let len = n * n * layers;
        SuffStats {
            t: 0,
            n,
            layers,
            n01: vec![0; len],
            n10: vec![0; len],
            nact: vec![0; len],
        }
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn dims(&self) -> [usize; 3] {
        [self.n, self.n, self.layers]
    }

    pub fn n01(&self) -> &[u32] {
        &self.n01
    }

    pub fn n10(&self) -> &[u32] {
        &self.n10
    }

    pub fn nact(&self) -> &[u32] {
        &self.nact
    }

    /// Folds the transition `a_prev -> a_cur` into the counts and advances `t`.
    pub fn update(&mut self, a_prev: &AdjacencySnapshot, a_cur: &AdjacencySnapshot) -> Result<()> {
        for a in [a_prev, a_cur] {
            if a.n() != self.n || a.layers() != self.layers {
                return Err(Error::usage(format!(
                    "snapshot is {}x{}x{}, statistics expect {}x{}x{}",
                    a.n(),
                    a.n(),
                    a.layers(),
                    self.n,
                    self.n,
                    self.layers
                )));
            }
        }
        let prev = a_prev.bits();
        let cur = a_cur.bits();
        for idx in 0..prev.len() {
            let p = prev[idx] as u32;
            let c = cur[idx] as u32;
            self.n01[idx] += c & (1 - p);
            self.n10[idx] += (1 - c) & p;
            self.nact[idx] += p;
        }
        self.t += 1;
        Ok(())
    }

    /// Counts over the window `(earlier.t, self.t]`.
    pub fn window_since(&self, earlier: &SuffStats) -> Result<WindowCounts> {
        if earlier.t > self.t || earlier.dims() != self.dims() {
            return Err(Error::usage("window baseline must be an earlier snapshot of the same shape"));
        }
        let k = (self.t - earlier.t) as u32;
        let len = self.n01.len();
        let mut c01 = Vec::with_capacity(len);
        let mut c00 = Vec::with_capacity(len);
        let mut c10 = Vec::with_capacity(len);
        let mut c11 = Vec::with_capacity(len);
        for idx in 0..len {
            let d01 = self.n01[idx] - earlier.n01[idx];
            let d10 = self.n10[idx] - earlier.n10[idx];
            let dact = self.nact[idx] - earlier.nact[idx];
            c01.push(d01);
            c00.push(k - dact - d01);
            c10.push(d10);
            c11.push(dact - d10);
        }
        Ok(WindowCounts {
            k: k as usize,
            dims: self.dims(),
            c01,
            c00,
            c10,
            c11,
        })
    }

    /// Counts over the whole history `(0, t]`.
    pub fn full_window(&self) -> WindowCounts {
        self.window_since(&SuffStats::zeros(self.n, self.layers))
            .expect("zero baseline is always earlier")
    }
}

/// Per-edge transition counts over one window of length `k`:
/// `c01 + c00 + c10 + c11 = k` for every entry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WindowCounts {
    pub k: usize,
    pub dims: [usize; 3],
    pub c01: Vec<u32>,
    pub c00: Vec<u32>,
    pub c10: Vec<u32>,
    pub c11: Vec<u32>,
}

impl WindowCounts {
    /// Closed-form MLEs `c01 / (c01 + c00)` and `c10 / (c10 + c11)`.
    /// Zero denominators give [`DEGENERATE_ESTIMATE`] and set the mask;
    /// diagonal entries (no edge) are fixed at zero and always masked.
    pub fn mle(&self) -> MleEstimate {
        let [n, _, layers] = self.dims;
        let len = self.c01.len();
        let mut theta = vec![0.0; len];
        let mut delta = vec![0.0; len];
        let mut theta_degenerate = vec![false; len];
        let mut delta_degenerate = vec![false; len];
        for i in 0..n {
            for j in 0..n {
                for l in 0..layers {
                    let idx = (i * n + j) * layers + l;
                    if i == j {
                        theta_degenerate[idx] = true;
                        delta_degenerate[idx] = true;
                        continue;
                    }
                    let from0 = self.c01[idx] + self.c00[idx];
                    if from0 == 0 {
                        theta[idx] = DEGENERATE_ESTIMATE;
                        theta_degenerate[idx] = true;
                    } else {
                        theta[idx] = self.c01[idx] as f64 / from0 as f64;
                    }
                    let from1 = self.c10[idx] + self.c11[idx];
                    if from1 == 0 {
                        delta[idx] = DEGENERATE_ESTIMATE;
                        delta_degenerate[idx] = true;
                    } else {
                        delta[idx] = self.c10[idx] as f64 / from1 as f64;
                    }
                }
            }
        }
        MleEstimate {
            k: self.k,
            theta: Tensor3::from_vec(self.dims, theta).expect("dims match"),
            delta: Tensor3::from_vec(self.dims, delta).expect("dims match"),
            theta_degenerate,
            delta_degenerate,
        }
    }
}

/// Windowed MLEs with masks of entries whose denominator vanished.
#[derive(Debug, Clone, PartialEq)]
pub struct MleEstimate {
    pub k: usize,
    pub theta: Tensor3,
    pub delta: Tensor3,
    pub theta_degenerate: Vec<bool>,
    pub delta_degenerate: Vec<bool>,
}

impl MleEstimate {
    /// Number of off-diagonal entries with at least one degenerate estimate.
    pub fn degenerate_count(&self) -> usize {
        let [n, _, layers] = self.theta.dims();
        let mut count = 0;
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                for l in 0..layers {
                    let idx = (i * n + j) * layers + l;
                    if self.theta_degenerate[idx] || self.delta_degenerate[idx] {
                        count += 1;
                    }
                }
            }
        }
        count
    }
}

/// Candidate look-back lengths at time `t`, ascending:
/// `{1} ∪ {2^j + ((t-1) mod 2^(j-1))} ∪ {the same + 2^(j-1)}` with the left
/// family for `1 <= j <= floor(log2((t-1)/3)) + 1` and the right family for
/// `1 <= j <= floor(log2(t-1)) - 1`.
pub fn dynamic_grid(t: usize) -> Result<Vec<usize>> {
    if t == 0 {
        return Err(Error::usage("dynamic grid is defined for t >= 1"));
    }
    let mut grid = vec![1];
    if t == 1 {
        return Ok(grid);
    }
    let m = t - 1;
    // Largest j with 3 * 2^(j-1) <= t - 1.
    let mut left_max = 0;
    while 3 * (1usize << left_max) <= m {
        left_max += 1;
    }
    // floor(log2(t - 1)) - 1.
    let right_max = (usize::BITS - m.leading_zeros()) as i64 - 2;
    for j in 1..=left_max {
        grid.push(grid_left(m, j));
    }
    for j in 1..=right_max.max(0) as usize {
        grid.push(grid_left(m, j) + (1 << (j - 1)));
    }
    grid.sort_unstable();
    grid.dedup();
    debug_assert!(grid.iter().all(|&k| k <= t));
    Ok(grid)
}

fn grid_left(m: usize, j: usize) -> usize {
    (1 << j) + m % (1 << (j - 1))
}

/// Current counts plus checkpoints at `t - k` for every grid length `k`.
#[derive(Debug, Clone)]
pub struct GridStore {
    current: SuffStats,
    checkpoints: BTreeMap<usize, SuffStats>,
}

impl GridStore {
    pub fn new(n: usize, layers: usize) -> Self {
        GridStore {
            current: SuffStats::zeros(n, layers),
            checkpoints: BTreeMap::new(),
        }
    }

    pub fn t(&self) -> usize {
        self.current.t()
    }

    pub fn current(&self) -> &SuffStats {
        &self.current
    }

    pub fn checkpoint_times(&self) -> Vec<usize> {
        self.checkpoints.keys().copied().collect()
    }

    /// Grid of candidate windows at the current time.
    pub fn grid(&self) -> Result<Vec<usize>> {
        dynamic_grid(self.t().max(1))
    }

    /// Moves from `t - 1` to `t` with the transition `a_prev -> a_cur`.
    pub fn advance(&mut self, a_prev: &AdjacencySnapshot, a_cur: &AdjacencySnapshot) -> Result<()> {
        let previous = self.current.clone();
        self.current.update(a_prev, a_cur)?;
        let t = self.current.t();
        self.checkpoints.insert(previous.t(), previous);
        let keep: Vec<usize> = dynamic_grid(t)?.into_iter().map(|k| t - k).collect();
        self.checkpoints.retain(|s, _| keep.contains(s));
        if self.checkpoints.len() != keep.len() {
            return Err(Error::Numerical(format!(
                "grid checkpoints {:?} do not cover {:?}",
                self.checkpoint_times(),
                keep
            )));
        }
        Ok(())
    }

    /// Counts over the last `k` steps; `k` must be on the grid or equal `t`.
    pub fn window(&self, k: usize) -> Result<WindowCounts> {
        let t = self.t();
        if k == 0 || k > t {
            return Err(Error::usage(format!("window {k} invalid at t = {t}")));
        }
        if k == t {
            return Ok(self.current.full_window());
        }
        let base = self
            .checkpoints
            .get(&(t - k))
            .ok_or_else(|| Error::usage(format!("no checkpoint for window {k} at t = {t}")))?;
        self.current.window_since(base)
    }

    pub fn windowed_mle(&self, k: usize) -> Result<MleEstimate> {
        Ok(self.window(k)?.mle())
    }

    pub fn full_history_mle(&self) -> Result<MleEstimate> {
        if self.t() == 0 {
            return Err(Error::usage("no transitions observed yet"));
        }
        Ok(full_history_estimate(&self.current))
    }
}

/// MLEs over the whole observed history.
pub fn full_history_estimate(stats: &SuffStats) -> MleEstimate {
    stats.full_window().mle()
}

/// Counts over a fixed trailing window, truncated to the available history.
#[derive(Debug, Clone)]
pub struct FixedWindowStore {
    lag: usize,
    current: SuffStats,
    history: VecDeque<SuffStats>,
}

impl FixedWindowStore {
    pub fn new(n: usize, layers: usize, lag: usize) -> Result<Self> {
        if lag == 0 {
            return Err(Error::usage("fixed window must be at least 1"));
        }
        let current = SuffStats::zeros(n, layers);
        let mut history = VecDeque::with_capacity(lag + 1);
        history.push_back(current.clone());
        Ok(FixedWindowStore { lag, current, history })
    }

    pub fn t(&self) -> usize {
        self.current.t()
    }

    pub fn advance(&mut self, a_prev: &AdjacencySnapshot, a_cur: &AdjacencySnapshot) -> Result<()> {
        self.current.update(a_prev, a_cur)?;
        self.history.push_back(self.current.clone());
        while self.history.len() > self.lag + 1 {
            self.history.pop_front();
        }
        Ok(())
    }

    /// Counts over `(t - min(lag, t), t]`.
    pub fn window(&self) -> WindowCounts {
        self.current
            .window_since(self.history.front().expect("history never empty"))
            .expect("history holds earlier snapshots")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_edge(states: &[u8]) -> Vec<AdjacencySnapshot> {
        states
            .iter()
            .map(|&s| {
                let mut a = AdjacencySnapshot::empty(2, 1);
                a.set_edge(0, 1, 0, s == 1).unwrap();
                a
            })
            .collect()
    }

    #[test]
    fn update_counts_hand_example() {
        let snaps = single_edge(&[0, 1, 0]);
        let mut s = SuffStats::zeros(2, 1);
        s.update(&snaps[0], &snaps[1]).unwrap();
        s.update(&snaps[1], &snaps[2]).unwrap();
        assert_eq!(s.t(), 2);
        let idx = 1; // (0, 1, 0)
        assert_eq!((s.n01()[idx], s.n10()[idx], s.nact()[idx]), (1, 1, 1));
    }

    #[test]
    fn no_transition_leaves_transition_counts() {
        let a = single_edge(&[1])[0].clone();
        let mut s = SuffStats::zeros(2, 1);
        s.update(&a, &a).unwrap();
        assert!(s.n01().iter().all(|&c| c == 0));
        assert!(s.n10().iter().all(|&c| c == 0));
    }

    #[test]
    fn saturated_predecessor_increments_active_off_diagonal() {
        let n = 4;
        let mut full = AdjacencySnapshot::empty(n, 2);
        for i in 0..n {
            for j in (i + 1)..n {
                for l in 0..2 {
                    full.set_edge(i, j, l, true).unwrap();
                }
            }
        }
        let mut s = SuffStats::zeros(n, 2);
        s.update(&full, &full).unwrap();
        for i in 0..n {
            for j in 0..n {
                for l in 0..2 {
                    let expected = u32::from(i != j);
                    assert_eq!(s.nact()[(i * n + j) * 2 + l], expected);
                }
            }
        }
    }

    #[test]
    fn update_rejects_shape_mismatch() {
        let mut s = SuffStats::zeros(3, 1);
        let a = AdjacencySnapshot::empty(2, 1);
        assert!(matches!(s.update(&a, &a), Err(Error::Usage(_))));
    }

    #[test]
    fn grid_values() {
        assert_eq!(dynamic_grid(1).unwrap(), vec![1]);
        assert_eq!(dynamic_grid(8).unwrap(), vec![1, 2, 3, 5]);
        // (t-1)/3 < 1 for t = 2, so only the singleton survives.
        assert_eq!(dynamic_grid(2).unwrap(), vec![1]);
        assert_eq!(dynamic_grid(4).unwrap(), vec![1, 2]);
        assert!(dynamic_grid(0).is_err());
    }

    #[test]
    fn grid_nesting_and_size() {
        for t in 1..=10_000usize {
            let next: Vec<usize> = dynamic_grid(t + 1).unwrap().iter().map(|k| t + 1 - k).collect();
            let mut allowed: Vec<usize> = dynamic_grid(t).unwrap().iter().map(|k| t - k).collect();
            allowed.push(t);
            assert!(next.iter().all(|s| allowed.contains(s)), "t = {t}");
            let g = dynamic_grid(t).unwrap();
            let log2 = (usize::BITS - t.leading_zeros() - 1) as usize;
            assert!(g.len() <= 2 * log2 + 2);
            assert!(g.iter().all(|&k| k >= 1 && k <= t));
        }
    }

    #[test]
    fn store_checkpoints() {
        let snaps = single_edge(&[0, 1, 1, 0, 1, 0, 0, 1, 1]);
        let mut store = GridStore::new(2, 1);
        store.advance(&snaps[0], &snaps[1]).unwrap();
        assert_eq!(store.checkpoint_times(), vec![0]);
        for t in 2..=8 {
            store.advance(&snaps[t - 1], &snaps[t]).unwrap();
        }
        assert_eq!(store.checkpoint_times(), vec![3, 5, 6, 7]);
        assert!(matches!(store.window(4), Err(Error::Usage(_))));
    }

    #[test]
    fn windowed_mle_hand_example() {
        // A^{t-4..t} = (0, 1, 1, 0, 1) at the end of a longer history.
        let states = [1, 0, 1, 1, 0, 1, 1, 0, 1];
        let snaps = single_edge(&states);
        let mut s = SuffStats::zeros(2, 1);
        let mut history = vec![s.clone()];
        for t in 1..snaps.len() {
            s.update(&snaps[t - 1], &snaps[t]).unwrap();
            history.push(s.clone());
        }
        let est = s.window_since(&history[s.t() - 4]).unwrap().mle();
        assert_eq!(est.theta.get(0, 1, 0), 1.0);
        assert_eq!(est.delta.get(0, 1, 0), 0.5);
        assert_eq!(est.theta.get(0, 0, 0), 0.0);
        assert!(est.theta_degenerate[0]);
    }

    #[test]
    fn degenerate_denominators() {
        // Edge always off: Delta has nothing to condition on.
        let snaps = single_edge(&[0, 0, 0]);
        let mut s = SuffStats::zeros(2, 1);
        s.update(&snaps[0], &snaps[1]).unwrap();
        s.update(&snaps[1], &snaps[2]).unwrap();
        let est = full_history_estimate(&s);
        assert_eq!(est.theta.get(0, 1, 0), 0.0);
        assert_eq!(est.delta.get(0, 1, 0), DEGENERATE_ESTIMATE);
        assert!(est.delta_degenerate[1]);
        assert!(!est.theta_degenerate[1]);
    }

    #[test]
    fn fixed_window_truncates() {
        let snaps = single_edge(&[0, 1, 0, 1, 1, 0]);
        let mut store = FixedWindowStore::new(2, 1, 3).unwrap();
        store.advance(&snaps[0], &snaps[1]).unwrap();
        assert_eq!(store.window().k, 1);
        for t in 2..snaps.len() {
            store.advance(&snaps[t - 1], &snaps[t]).unwrap();
        }
        let w = store.window();
        assert_eq!(w.k, 3);
        // Last three transitions: 0->1, 1->1, 1->0.
        assert_eq!((w.c01[1], w.c11[1], w.c10[1], w.c00[1]), (1, 1, 1, 0));
    }
}
