//! Adaptive look-back window selection.
//!
//! For a window of length `k` the averaged negative log-likelihood of an
//! edge at candidate parameters `(theta, delta)` is
//!
//! ```text
//! f_k = -(1/k) [c01 ln theta + c00 ln(1 - theta) + c10 ln delta + c11 ln(1 - delta)]
//! ```
//!
//! where the `c`s are that window's transition counts. A longer window is
//! accepted only if plugging its MLEs into every shorter window's loss costs
//! no more than the tolerance `tau(k_short)` on any edge.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{simulate_edgewise, AdjacencySnapshot, InitRule};
use crate::stats::{full_history_estimate, GridStore, SuffStats, WindowCounts};
use crate::tensor::Tensor3;

/// Estimates are clamped to `[EPS, 1 - EPS]` before taking logarithms.
pub const LOG_CLAMP: f64 = 1e-6;

/// Drift envelope `V(k)` in the tolerance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DriftEnvelope {
    /// `V = 0`.
    Zero,
    /// `V(k) = k^(-exponent)`.
    Power(f64),
}

impl DriftEnvelope {
    pub fn eval(self, k: f64) -> f64 {
        match self {
            DriftEnvelope::Zero => 0.0,
            DriftEnvelope::Power(a) => k.powf(-a),
        }
    }
}

/// `tau(k) = c_tau * max{ ln(max(n, L, T)) ln(T) ln(ln(T)) / k, V(k)^2 }`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToleranceRule {
    pub c_tau: f64,
    pub drift: DriftEnvelope,
}

impl ToleranceRule {
    pub fn new(c_tau: f64) -> Result<Self> {
        if !(c_tau > 0.0) {
            return Err(Error::usage(format!("C_tau must be positive, got {c_tau}")));
        }
        Ok(ToleranceRule {
            c_tau,
            drift: DriftEnvelope::Power(0.5),
        })
    }

    /// A rule that accepts every window.
    pub fn unbounded() -> Self {
        ToleranceRule {
            c_tau: f64::INFINITY,
            drift: DriftEnvelope::Power(0.5),
        }
    }

    pub fn with_drift(mut self, drift: DriftEnvelope) -> Self {
        self.drift = drift;
        self
    }
}

/// Tolerance for a window of length `k` with natural logarithms.
pub fn tolerance(k: usize, rule: &ToleranceRule, n: usize, layers: usize, t_max: usize) -> Result<f64> {
    let unit = unit_tolerance(k, rule.drift, n, layers, t_max)?;
    Ok(rule.c_tau * unit)
}

/// Tolerance with `c_tau = 1`.
fn unit_tolerance(k: usize, drift: DriftEnvelope, n: usize, layers: usize, t_max: usize) -> Result<f64> {
    if t_max < 3 {
        return Err(Error::usage(format!("tolerance needs T >= 3, got {t_max}")));
    }
    if k == 0 {
        return Err(Error::usage("window length must be positive"));
    }
    let big = n.max(layers).max(t_max) as f64;
    let tt = t_max as f64;
    let stochastic = big.ln() * tt.ln() * tt.ln().ln() / k as f64;
    let v = drift.eval(k as f64);
    Ok(stochastic.max(v * v))
}

/// Flat indices of the upper-triangular off-diagonal entries of an
/// `n x n x L` tensor.
pub fn upper_indices(n: usize, layers: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(layers * n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            for l in 0..layers {
                out.push((i * n + j) * layers + l);
            }
        }
    }
    out
}

/// Counts and log-parameters of one window, restricted to edges `i < j`.
#[derive(Debug, Clone)]
pub struct WindowLoss {
    pub k: usize,
    counts: [Vec<f64>; 4],
    logs: [Vec<f64>; 4],
}

impl WindowLoss {
    pub fn new(w: &WindowCounts, upper: &[usize]) -> Self {
        let pick = |v: &[u32]| upper.iter().map(|&i| v[i] as f64).collect::<Vec<_>>();
        let c01 = pick(&w.c01);
        let c00 = pick(&w.c00);
        let c10 = pick(&w.c10);
        let c11 = pick(&w.c11);
        let len = upper.len();
        let mut logs: [Vec<f64>; 4] = std::array::from_fn(|_| Vec::with_capacity(len));
        for e in 0..len {
            let theta = ratio_or_half(c01[e], c00[e]).clamp(LOG_CLAMP, 1.0 - LOG_CLAMP);
            let delta = ratio_or_half(c10[e], c11[e]).clamp(LOG_CLAMP, 1.0 - LOG_CLAMP);
            logs[0].push(theta.ln());
            logs[1].push((1.0 - theta).ln());
            logs[2].push(delta.ln());
            logs[3].push((1.0 - delta).ln());
        }
        WindowLoss {
            k: w.k,
            counts: [c01, c00, c10, c11],
            logs,
        }
    }

    /// Whether edge `e` has no `0 -> .` or no `1 -> .` transition here.
    pub fn degenerate(&self, e: usize) -> bool {
        let c = &self.counts;
        c[0][e] + c[1][e] == 0.0 || c[2][e] + c[3][e] == 0.0
    }

    /// `f_k` of this window evaluated at its own MLEs, per upper edge.
    pub fn own_loss(&self) -> Vec<f64> {
        self.loss_at(&self.logs)
    }

    fn loss_at(&self, logs: &[Vec<f64>; 4]) -> Vec<f64> {
        let inv_k = 1.0 / self.k as f64;
        (0..self.counts[0].len())
            .map(|e| {
                -inv_k
                    * (0..4)
                        .map(|c| weighted_log(self.counts[c][e], logs[c][e]))
                        .sum::<f64>()
            })
            .collect()
    }
}

#[inline]
fn ratio_or_half(hit: f64, miss: f64) -> f64 {
    if hit + miss > 0.0 {
        hit / (hit + miss)
    } else {
        0.5
    }
}

/// `count * log` with the convention `0 * log(.) = 0`.
#[inline]
fn weighted_log(count: f64, log: f64) -> f64 {
    if count == 0.0 {
        0.0
    } else {
        count * log
    }
}

/// `max_e [ f_small(large MLE) - f_small(small MLE) ]` over edges `i < j`.
///
/// Edges whose `Theta` or `Delta` MLE is degenerate in either window are left
/// out of the maximum.
pub fn loss_gap(small: &WindowLoss, large: &WindowLoss) -> Result<f64> {
    let inv_k = 1.0 / small.k as f64;
    let mut worst = 0.0_f64;
    for e in 0..small.counts[0].len() {
        if small.degenerate(e) || large.degenerate(e) {
            continue;
        }
        let mut acc = 0.0;
        for c in 0..4 {
            let n = small.counts[c][e];
            if n != 0.0 {
                acc += n * (small.logs[c][e] - large.logs[c][e]);
            }
        }
        worst = worst.max(acc * inv_k);
    }
    if !worst.is_finite() {
        return Err(Error::Numerical(format!("non-finite loss gap {worst}")));
    }
    Ok(worst)
}

/// Loss terms for every candidate window at the current time.
#[derive(Debug, Clone)]
pub struct LossEvalContext {
    windows: Vec<WindowLoss>,
}

impl LossEvalContext {
    pub fn from_store(store: &GridStore) -> Result<Self> {
        let [n, _, layers] = store.current().dims();
        let upper = upper_indices(n, layers);
        let windows = store
            .grid()?
            .into_iter()
            .map(|k| Ok(WindowLoss::new(&store.window(k)?, &upper)))
            .collect::<Result<Vec<_>>>()?;
        Ok(LossEvalContext { windows })
    }

    pub fn windows(&self) -> &[WindowLoss] {
        &self.windows
    }

    fn find(&self, k: usize) -> Result<&WindowLoss> {
        self.windows
            .iter()
            .find(|w| w.k == k)
            .ok_or_else(|| Error::usage(format!("window {k} is not on the grid")))
    }

    pub fn loss_gap(&self, k_small: usize, k_large: usize) -> Result<f64> {
        loss_gap(self.find(k_small)?, self.find(k_large)?)
    }
}

/// Outcome of the stability scan at one time point.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowDecision {
    pub k_hat: usize,
    /// The scan stopped at a rejected candidate.
    pub brk: bool,
    /// Candidate windows in ascending order.
    pub grid: Vec<usize>,
    /// For each examined candidate, the largest loss gap over shorter windows.
    pub max_gaps: Vec<f64>,
}

impl WindowDecision {
    pub fn largest_candidate(&self) -> usize {
        *self.grid.last().expect("grid is never empty")
    }
}

/// Scans the grid from the shortest window and returns the longest window
/// accepted before the first rejection.
pub fn select_window(store: &GridStore, rule: &ToleranceRule, horizon: usize) -> Result<WindowDecision> {
    let [n, _, layers] = store.current().dims();
    let ctx = LossEvalContext::from_store(store)?;
    let grid: Vec<usize> = ctx.windows.iter().map(|w| w.k).collect();
    let taus = grid
        .iter()
        .map(|&k| tolerance(k, rule, n, layers, horizon))
        .collect::<Result<Vec<_>>>()?;
    let mut max_gaps = Vec::with_capacity(grid.len());
    for q in 0..grid.len() {
        let mut worst = 0.0_f64;
        let mut accepted = true;
        for u in 0..q {
            let gap = loss_gap(&ctx.windows[u], &ctx.windows[q])?;
            worst = worst.max(gap);
            if gap > taus[u] {
                accepted = false;
                break;
            }
        }
        max_gaps.push(worst);
        if !accepted {
            return Ok(WindowDecision {
                k_hat: grid[q - 1],
                brk: true,
                grid,
                max_gaps,
            });
        }
    }
    Ok(WindowDecision {
        k_hat: *grid.last().expect("grid is never empty"),
        brk: false,
        grid,
        max_gaps,
    })
}

/// Smallest `c_tau` at which every candidate on the grid is accepted, with
/// the tolerance shape `drift`. Zero when the grid has one element.
pub fn acceptance_threshold(store: &GridStore, drift: DriftEnvelope, horizon: usize) -> Result<f64> {
    let [n, _, layers] = store.current().dims();
    let ctx = LossEvalContext::from_store(store)?;
    let mut need = 0.0_f64;
    for (u, small) in ctx.windows.iter().enumerate() {
        let unit = unit_tolerance(small.k, drift, n, layers, horizon)?;
        for large in &ctx.windows[u + 1..] {
            need = need.max(loss_gap(small, large)? / unit);
        }
    }
    Ok(need)
}

/// Inputs of the bootstrap calibration of `c_tau`.
#[derive(Debug, Clone)]
pub struct CalibrationConfig {
    /// Ascending candidate constants.
    pub grid_c: Vec<f64>,
    /// First time at which full-window acceptance is required.
    pub t0: usize,
    pub alpha: f64,
    pub bootstrap: usize,
    pub seed: u64,
}

impl CalibrationConfig {
    /// 60 log-spaced constants between 1e-3 and 10.
    pub fn default_grid() -> Vec<f64> {
        (0..60).map(|i| 10f64.powf(-3.0 + 4.0 * i as f64 / 59.0)).collect()
    }
}

/// Result of [`calibrate_ctau`].
#[derive(Debug, Clone)]
pub struct CalibrationReport {
    pub c_tau: f64,
    /// `(c, fraction of bootstrap paths keeping the full grid window)`.
    pub acceptance: Vec<(f64, f64)>,
    /// Per bootstrap path, the smallest constant that keeps it stable.
    pub thresholds: Vec<f64>,
    pub theta_hat: Tensor3,
    pub delta_hat: Tensor3,
}

/// Calibrates `c_tau` by parametric bootstrap from stationary training
/// snapshots `A^1, ..., A^T` (with `A^0 = 0`).
///
/// Each of `bootstrap` paths is simulated from the edgewise full-history
/// MLEs of the training data. A path is *stable* at `c` if the selector with
/// `tau_c(k) = c ln(max(n, L, T)) ln(T) ln(ln(T)) / k` returns the longest
/// grid window at every `t` in `[t0, T]`. The smallest `c` on the grid
/// whose stable fraction reaches `1 - alpha` is returned.
pub fn calibrate_ctau(train: &[AdjacencySnapshot], cfg: &CalibrationConfig) -> Result<CalibrationReport> {
    let t_train = train.len();
    if t_train < cfg.t0 + 1 || t_train < 3 {
        return Err(Error::usage(format!(
            "training length {t_train} too short for t0 = {}",
            cfg.t0
        )));
    }
    if cfg.grid_c.is_empty() || cfg.grid_c.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::usage("calibration grid must be non-empty and strictly ascending"));
    }
    if !(0.0..=1.0).contains(&cfg.alpha) || cfg.bootstrap == 0 {
        return Err(Error::usage("alpha must lie in [0, 1] and the bootstrap size be positive"));
    }
    let n = train[0].n();
    let layers = train[0].layers();

    let mut stats = SuffStats::zeros(n, layers);
    let mut prev = AdjacencySnapshot::empty(n, layers);
    for a in train {
        stats.update(&prev, a)?;
        prev = a.clone();
    }
    let fitted = full_history_estimate(&stats);
    let (theta_hat, delta_hat) = (fitted.theta, fitted.delta);

    let thresholds = (0..cfg.bootstrap)
        .into_par_iter()
        .map(|b| {
            let seed = cfg.seed.wrapping_add(0x9E37_79B9_7F4A_7C15_u64.wrapping_mul(b as u64 + 1));
            let path = simulate_edgewise(&theta_hat, &delta_hat, t_train, seed, InitRule::Empty)?;
            path_threshold(&path, cfg.t0, t_train)
        })
        .collect::<Result<Vec<f64>>>()?;

    let required = 1.0 - cfg.alpha;
    let acceptance: Vec<(f64, f64)> = cfg
        .grid_c
        .iter()
        .map(|&c| {
            let stable = thresholds.iter().filter(|&&x| x <= c).count();
            (c, stable as f64 / thresholds.len() as f64)
        })
        .collect();
    match acceptance.iter().find(|(_, a)| *a >= required - 1e-12) {
        Some(&(c, _)) => Ok(CalibrationReport {
            c_tau: c,
            acceptance,
            thresholds,
            theta_hat,
            delta_hat,
        }),
        None => Err(Error::GridExhausted {
            best_acceptance: acceptance.iter().map(|a| a.1).fold(0.0, f64::max),
            required,
        }),
    }
}

/// Smallest constant keeping the longest window at all `t >= t0` along
/// `path = [A^0, A^1, ..., A^T]`.
fn path_threshold(path: &[AdjacencySnapshot], t0: usize, horizon: usize) -> Result<f64> {
    let mut store = GridStore::new(path[0].n(), path[0].layers());
    let mut need = 0.0_f64;
    for t in 1..path.len() {
        store.advance(&path[t - 1], &path[t])?;
        if t >= t0 {
            need = need.max(acceptance_threshold(&store, DriftEnvelope::Zero, horizon)?);
        }
    }
    Ok(need)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn counts(k: usize, c01: u32, c00: u32, c10: u32, c11: u32) -> WindowCounts {
        // A 2-node, 1-layer tensor; entry 1 is the edge (0, 1).
        let mk = |v: u32| vec![0, v, v, 0];
        WindowCounts {
            k,
            dims: [2, 2, 1],
            c01: mk(c01),
            c00: mk(c00),
            c10: mk(c10),
            c11: mk(c11),
        }
    }

    #[test]
    fn gap_to_itself_is_zero() {
        let up = upper_indices(2, 1);
        let w = WindowLoss::new(&counts(5, 1, 2, 1, 1), &up);
        assert_eq!(loss_gap(&w, &w).unwrap(), 0.0);
    }

    #[test]
    fn gap_hand_example() {
        // Short window: theta MLE 0.5, delta MLE 0.5. Long window: theta 0.9, delta 0.5.
        let up = upper_indices(2, 1);
        let small = WindowLoss::new(&counts(4, 1, 1, 1, 1), &up);
        let large = WindowLoss::new(&counts(20, 9, 1, 5, 5), &up);
        let gap = loss_gap(&small, &large).unwrap();
        let expected = 0.25 * (0.25f64 / 0.09).ln();
        assert!((gap - expected).abs() < 1e-12, "{gap} vs {expected}");
        assert!((expected - 0.2554).abs() < 1e-4);
    }

    #[test]
    fn degenerate_edges_skipped() {
        let up = upper_indices(2, 1);
        let small = WindowLoss::new(&counts(2, 1, 1, 0, 0), &up);
        let large = WindowLoss::new(&counts(20, 9, 1, 5, 5), &up);
        assert!(small.degenerate(0) && !large.degenerate(0));
        assert_eq!(loss_gap(&small, &large).unwrap(), 0.0);
        assert_eq!(loss_gap(&large, &small).unwrap(), 0.0);
    }

    #[test]
    fn tolerance_values() {
        let rule = ToleranceRule::new(1.0).unwrap();
        let tau = tolerance(16, &rule, 100, 2, 175).unwrap();
        let l = 175f64.ln();
        let expected = (l * l * l.ln() / 16.0).max(1.0 / 16.0);
        assert!((tau - expected).abs() < 1e-12);
        assert!((tau - 2.737).abs() < 1e-3);

        let flat = rule.with_drift(DriftEnvelope::Zero);
        let t = 50usize;
        let tf = t as f64;
        let expected = tf.ln().powi(2) * tf.ln().ln() / tf;
        assert!((tolerance(t, &flat, t, t, t).unwrap() - expected).abs() < 1e-12);

        assert!(matches!(tolerance(1, &rule, 10, 1, 2), Err(Error::Usage(_))));
        assert!(ToleranceRule::new(0.0).is_err());
    }

    #[test]
    fn tolerance_non_increasing() {
        let rule = ToleranceRule::new(0.3).unwrap();
        let mut last = f64::INFINITY;
        for k in 1..500 {
            let tau = tolerance(k, &rule, 40, 3, 500).unwrap();
            assert!(tau <= last);
            last = tau;
        }
    }
}
