//! Per-time estimators: the stationary and adaptive procedures and the
//! full-history, fixed-window, static and layer-aggregated baselines.

use std::fmt;
use std::str::FromStr;

use crate::community::{adjusted_rand_index, extract_membership, kmeans_membership, DEFAULT_RESTARTS};
use crate::error::{Error, Result};
use crate::model::{AdjacencySnapshot, Membership, Scenario};
use crate::spectral::{estimate_subspaces, hpca, project_lowrank, PowerOfTwoSchedule, RefineConfig, SubspaceSet};
use crate::stats::{FixedWindowStore, GridStore, MleEstimate, SuffStats};
use crate::tensor::Tensor3;
use crate::window::{select_window, ToleranceRule};

/// Which estimator to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PolicyVariant {
    /// Full-history estimates with subspaces refreshed at powers of two.
    Stationary,
    /// Window chosen by the stability test, subspaces refreshed every step.
    Adaptive,
    FullHistory,
    FixedWindow(usize),
    /// Clusters the running average of the adjacency tensors.
    Static,
    /// Averages the per-layer estimates and runs the single-layer pipeline.
    Aggregated,
}

impl fmt::Display for PolicyVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PolicyVariant::Stationary => f.write_str("stationary"),
            PolicyVariant::Adaptive => f.write_str("adaptive"),
            PolicyVariant::FullHistory => f.write_str("full-history"),
            PolicyVariant::FixedWindow(k) => write!(f, "fixed-{k}"),
            PolicyVariant::Static => f.write_str("static"),
            PolicyVariant::Aggregated => f.write_str("aggregated"),
        }
    }
}

impl FromStr for PolicyVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "stationary" | "proposed" => PolicyVariant::Stationary,
            "adaptive" => PolicyVariant::Adaptive,
            "full-history" | "full" => PolicyVariant::FullHistory,
            "static" => PolicyVariant::Static,
            "aggregated" => PolicyVariant::Aggregated,
            other => {
                let k = other
                    .strip_prefix("fixed-")
                    .and_then(|k| k.parse::<usize>().ok())
                    .filter(|&k| k >= 1)
                    .ok_or_else(|| {
                        Error::usage(format!(
                            "unknown policy '{other}' (expected stationary, adaptive, full-history, \
                             fixed-K, static or aggregated)"
                        ))
                    })?;
                PolicyVariant::FixedWindow(k)
            }
        })
    }
}

/// An estimator together with its tuning.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorPolicy {
    pub variant: PolicyVariant,
    pub refine: RefineConfig,
    /// Used by [`PolicyVariant::Adaptive`] only.
    pub tolerance: ToleranceRule,
    /// Series length `T` entering the tolerance.
    pub horizon: usize,
    pub restarts: usize,
    pub seed: u64,
}

impl EstimatorPolicy {
    pub fn new(variant: PolicyVariant, refine: RefineConfig, horizon: usize) -> Self {
        EstimatorPolicy {
            variant,
            refine,
            tolerance: ToleranceRule {
                c_tau: 1.0,
                drift: crate::window::DriftEnvelope::Power(0.5),
            },
            horizon,
            restarts: DEFAULT_RESTARTS,
            seed: 0,
        }
    }

    pub fn with_tolerance(mut self, tolerance: ToleranceRule) -> Self {
        self.tolerance = tolerance;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn validate(&self, n: usize, layers: usize) -> Result<()> {
        if let PolicyVariant::FixedWindow(0) = self.variant {
            return Err(Error::usage("fixed window must be at least 1"));
        }
        let effective_layers = if self.variant == PolicyVariant::Aggregated { 1 } else { layers };
        let mut refine = self.refine;
        if self.variant == PolicyVariant::Aggregated {
            refine.r1 = 1;
            refine.r2 = 1;
        }
        refine.validate(n, effective_layers)
    }
}

/// Output of one estimator step.
#[derive(Debug, Clone)]
pub struct EstimateBundle {
    pub t: usize,
    /// Window used for the raw estimates (`t` for the full history).
    pub k_hat: usize,
    pub theta_hat: Tensor3,
    pub delta_hat: Tensor3,
    pub theta_tilde: Tensor3,
    pub delta_tilde: Tensor3,
    pub subspaces: SubspaceSet,
    pub z_hat: Membership,
    /// Off-diagonal entries whose `Theta` or `Delta` estimate had no data.
    pub degenerate: usize,
    /// Whether the subspaces were recomputed at this step.
    pub refreshed: bool,
    /// Whether the raw estimates are transition probabilities (false for the
    /// static baseline, whose estimate is an average adjacency).
    pub has_transitions: bool,
}

enum Counts {
    Full(SuffStats),
    Grid(GridStore),
    Fixed(FixedWindowStore),
    Cumulative(Tensor3),
}

/// Streaming state of one estimator over one network sequence.
pub struct Pipeline {
    policy: EstimatorPolicy,
    prev: AdjacencySnapshot,
    t: usize,
    counts: Counts,
    subspaces: Option<SubspaceSet>,
    schedule: PowerOfTwoSchedule,
    z_cache: Option<Membership>,
}

impl Pipeline {
    /// Starts from the initial snapshot `A^0`.
    pub fn new(initial: AdjacencySnapshot, policy: EstimatorPolicy) -> Result<Self> {
        let (n, layers) = (initial.n(), initial.layers());
        policy.validate(n, layers)?;
        let counts = match policy.variant {
            PolicyVariant::Stationary | PolicyVariant::FullHistory | PolicyVariant::Aggregated => {
                Counts::Full(SuffStats::zeros(n, layers))
            }
            PolicyVariant::Adaptive => Counts::Grid(GridStore::new(n, layers)),
            PolicyVariant::FixedWindow(k) => Counts::Fixed(FixedWindowStore::new(n, layers, k)?),
            PolicyVariant::Static => Counts::Cumulative(Tensor3::zeros([n, n, layers])),
        };
        Ok(Pipeline {
            policy,
            prev: initial,
            t: 0,
            counts,
            subspaces: None,
            schedule: PowerOfTwoSchedule::default(),
            z_cache: None,
        })
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn policy(&self) -> &EstimatorPolicy {
        &self.policy
    }

    /// Consumes `A^t`; `t` must be one past the previous step.
    pub fn step(&mut self, t: usize, a_t: AdjacencySnapshot) -> Result<EstimateBundle> {
        if t != self.t + 1 {
            return Err(Error::usage(format!("expected snapshot for t = {}, got t = {t}", self.t + 1)));
        }
        if a_t.n() != self.prev.n() || a_t.layers() != self.prev.layers() {
            return Err(Error::usage("snapshot dimensions changed mid-stream"));
        }
        let (k_hat, raw) = match &mut self.counts {
            Counts::Full(stats) => {
                stats.update(&self.prev, &a_t)?;
                (t, Some(stats.full_window().mle()))
            }
            Counts::Grid(store) => {
                store.advance(&self.prev, &a_t)?;
                let decision = select_window(store, &self.policy.tolerance, self.policy.horizon)?;
                (decision.k_hat, Some(store.windowed_mle(decision.k_hat)?))
            }
            Counts::Fixed(store) => {
                store.advance(&self.prev, &a_t)?;
                let w = store.window();
                (w.k, Some(w.mle()))
            }
            Counts::Cumulative(sum) => {
                for (s, x) in sum.data_mut().iter_mut().zip(a_t.to_tensor().data()) {
                    *s += x;
                }
                (t, None)
            }
        };
        self.t = t;
        self.prev = a_t;
        let bundle = match raw {
            Some(mle) if self.policy.variant == PolicyVariant::Aggregated => self.finish_aggregated(t, k_hat, mle)?,
            Some(mle) => self.finish_transitions(t, k_hat, mle)?,
            None => self.finish_static(t)?,
        };
        Ok(bundle)
    }

    fn refresh_due(&mut self, t: usize) -> bool {
        match self.policy.variant {
            PolicyVariant::Stationary => self.schedule.tick(t),
            _ => true,
        }
    }

    fn cluster(&mut self, refreshed: bool, t: usize, u_z: &crate::Matrix) -> Result<Membership> {
        if !refreshed {
            if let Some(z) = &self.z_cache {
                return Ok(z.clone());
            }
        }
        let seed = self.policy.seed ^ (t as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
        let res = kmeans_membership(u_z, self.policy.refine.k_rank, self.policy.restarts, seed)?;
        let z = extract_membership(&res);
        self.z_cache = Some(z.clone());
        Ok(z)
    }

    fn finish_transitions(&mut self, t: usize, k_hat: usize, mle: MleEstimate) -> Result<EstimateBundle> {
        let degenerate = mle.degenerate_count();
        let refreshed = self.refresh_due(t) || self.subspaces.is_none();
        if refreshed {
            let mut s = estimate_subspaces(&mle.theta, &mle.delta, &self.policy.refine)?;
            s.refreshed_at = t;
            self.subspaces = Some(s);
        }
        let subspaces = self.subspaces.clone().expect("subspaces set above");
        let (theta_tilde, delta_tilde) = project_lowrank(&mle.theta, &mle.delta, &subspaces)?;
        let z_hat = self.cluster(refreshed, t, &subspaces.u_z)?;
        Ok(EstimateBundle {
            t,
            k_hat,
            theta_hat: mle.theta,
            delta_hat: mle.delta,
            theta_tilde,
            delta_tilde,
            subspaces,
            z_hat,
            degenerate,
            refreshed,
            has_transitions: true,
        })
    }

    fn finish_aggregated(&mut self, t: usize, k_hat: usize, mle: MleEstimate) -> Result<EstimateBundle> {
        let degenerate = mle.degenerate_count();
        let layers = mle.theta.dims()[2];
        let theta = layer_mean(&mle.theta);
        let delta = layer_mean(&mle.delta);
        let mut refine = self.policy.refine;
        refine.r1 = 1;
        refine.r2 = 1;
        let mut s = estimate_subspaces(&theta, &delta, &refine)?;
        s.refreshed_at = t;
        let (theta_tilde, delta_tilde) = project_lowrank(&theta, &delta, &s)?;
        let z_hat = self.cluster(true, t, &s.u_z)?;
        self.subspaces = Some(s.clone());
        Ok(EstimateBundle {
            t,
            k_hat,
            theta_hat: broadcast_layers(&theta, layers),
            delta_hat: broadcast_layers(&delta, layers),
            theta_tilde: broadcast_layers(&theta_tilde, layers),
            delta_tilde: broadcast_layers(&delta_tilde, layers),
            subspaces: s,
            z_hat,
            degenerate,
            refreshed: true,
            has_transitions: true,
        })
    }

    fn finish_static(&mut self, t: usize) -> Result<EstimateBundle> {
        let Counts::Cumulative(sum) = &self.counts else {
            unreachable!("static policy keeps a running sum")
        };
        let avg = sum.scale(1.0 / t as f64);
        let cfg = &self.policy.refine;
        let u_z = hpca(&avg.gram(1)?, cfg.k_rank, &cfg.hpca)?;
        let u_w = hpca(&avg.gram(3)?, cfg.r1, &cfg.hpca)?;
        let subspaces = SubspaceSet {
            u_z: u_z.basis,
            u_m: u_w.basis.clone(),
            u_w: u_w.basis,
            refreshed_at: t,
            iterations: [u_z.iterations, u_w.iterations, u_w.iterations],
        };
        let (tilde, _) = project_lowrank(&avg, &avg, &subspaces)?;
        let z_hat = self.cluster(true, t, &subspaces.u_z)?;
        let zeros = Tensor3::zeros(avg.dims());
        Ok(EstimateBundle {
            t,
            k_hat: t,
            theta_hat: avg,
            delta_hat: zeros.clone(),
            theta_tilde: tilde,
            delta_tilde: zeros,
            subspaces,
            z_hat,
            degenerate: 0,
            refreshed: true,
            has_transitions: false,
        })
    }
}

fn layer_mean(t: &Tensor3) -> Tensor3 {
    let [n, m, layers] = t.dims();
    Tensor3::from_fn([n, m, 1], |i, j, _| {
        (0..layers).map(|l| t.get(i, j, l)).sum::<f64>() / layers as f64
    })
}

fn broadcast_layers(t: &Tensor3, layers: usize) -> Tensor3 {
    Tensor3::from_fn([t.dims()[0], t.dims()[1], layers], |i, j, _| t.get(i, j, 0))
}

/// Ground truth for scoring an estimator.
pub trait TruthSource {
    fn membership(&self) -> &Membership;
    /// `(Theta^t, Delta^t)`.
    fn params_at(&self, t: usize) -> Result<(Tensor3, Tensor3)>;
}

impl TruthSource for Scenario {
    fn membership(&self) -> &Membership {
        &self.membership
    }

    fn params_at(&self, t: usize) -> Result<(Tensor3, Tensor3)> {
        self.truth_at(t)
    }
}

/// Per-time errors of one estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub t: usize,
    pub k_hat: usize,
    /// `||Theta_tilde - Theta||_F / (n sqrt(L))`; absent for the static baseline.
    pub err_theta: Option<f64>,
    pub err_delta: Option<f64>,
    /// `1 - ARI`.
    pub err_z: f64,
}

/// Scores a bundle against the truth at its time.
pub fn score(bundle: &EstimateBundle, truth: &dyn TruthSource) -> Result<Metrics> {
    let (theta, delta) = truth.params_at(bundle.t)?;
    if theta.dims() != bundle.theta_tilde.dims() {
        return Err(Error::usage(format!(
            "truth has dims {:?}, estimate {:?}",
            theta.dims(),
            bundle.theta_tilde.dims()
        )));
    }
    let [n, _, layers] = theta.dims();
    let norm = n as f64 * (layers as f64).sqrt();
    let (err_theta, err_delta) = if bundle.has_transitions {
        (
            Some((&bundle.theta_tilde - &theta).frobenius_norm() / norm),
            Some((&bundle.delta_tilde - &delta).frobenius_norm() / norm),
        )
    } else {
        (None, None)
    };
    let err_z = 1.0 - adjusted_rand_index(&bundle.z_hat, truth.membership())?;
    Ok(Metrics {
        t: bundle.t,
        k_hat: bundle.k_hat,
        err_theta,
        err_delta,
        err_z,
    })
}

/// Streams `snapshots[1..]` through a fresh pipeline started at
/// `snapshots[0]`, scoring each step when a truth is given.
pub fn run(
    snapshots: &[AdjacencySnapshot],
    policy: &EstimatorPolicy,
    truth: Option<&dyn TruthSource>,
) -> Result<Vec<(EstimateBundle, Option<Metrics>)>> {
    let mut out = Vec::new();
    run_with(snapshots, policy, truth, |bundle, metrics| {
        out.push((bundle, metrics));
        Ok(())
    })?;
    Ok(out)
}

/// Like [`run`] but hands each step to `sink` instead of collecting, so long
/// runs need not keep every tensor alive.
pub fn run_with(
    snapshots: &[AdjacencySnapshot],
    policy: &EstimatorPolicy,
    truth: Option<&dyn TruthSource>,
    mut sink: impl FnMut(EstimateBundle, Option<Metrics>) -> Result<()>,
) -> Result<()> {
    let Some((first, rest)) = snapshots.split_first() else {
        return Err(Error::usage("need at least one snapshot"));
    };
    if let Some(truth) = truth {
        if truth.membership().n() != first.n() {
            return Err(Error::usage(format!(
                "truth has n = {}, data n = {}",
                truth.membership().n(),
                first.n()
            )));
        }
    }
    let mut pipeline = Pipeline::new(first.clone(), policy.clone())?;
    for (idx, a) in rest.iter().enumerate() {
        let bundle = pipeline.step(idx + 1, a.clone())?;
        let metrics = truth.map(|tr| score(&bundle, tr)).transpose()?;
        sink(bundle, metrics)?;
    }
    Ok(())
}
