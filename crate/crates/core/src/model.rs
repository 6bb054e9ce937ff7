//! Model parameters, the edge-refresh simulator and the benchmark scenarios.
//!
//! Time is 1-based for parameters: the transition into snapshot `A^t` is
//! governed by `(W^t, M^t)`. A simulated trajectory of horizon `T` holds the
//! `T + 1` snapshots `A^0, ..., A^T`, where `A^0` is drawn from the initial
//! law.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tensor::{Matrix, Tensor3};

/// Community assignment of `n` nodes into `k` communities (0-based labels).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Membership {
    k: usize,
    labels: Vec<usize>,
}

impl Membership {
    pub fn new(labels: Vec<usize>, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::usage("community count must be positive"));
        }
        if let Some(bad) = labels.iter().find(|&&c| c >= k) {
            return Err(Error::usage(format!("label {bad} out of range for k={k}")));
        }
        Ok(Membership { k, labels })
    }

    /// Contiguous balanced blocks: node `i` goes to community `i * k / n`.
    pub fn balanced(n: usize, k: usize) -> Result<Self> {
        if n < k {
            return Err(Error::usage(format!("cannot split {n} nodes into {k} communities")));
        }
        Membership::new((0..n).map(|i| i * k / n).collect(), k)
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn label(&self, node: usize) -> usize {
        self.labels[node]
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &c in &self.labels {
            sizes[c] += 1;
        }
        sizes
    }

    pub fn all_nonempty(&self) -> bool {
        self.sizes().iter().all(|&s| s > 0)
    }

    /// The `n x k` 0/1 membership matrix.
    pub fn to_matrix(&self) -> Matrix {
        let mut z = Matrix::zeros(self.n(), self.k);
        for (i, &c) in self.labels.iter().enumerate() {
            z[(i, c)] = 1.0;
        }
        z
    }
}

/// Block-level formation (`w`) and dissolution (`m`) probabilities,
/// `k x k x L`, symmetric in the first two indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Connectivity {
    w: Tensor3,
    m: Tensor3,
    c_min: f64,
}

impl Connectivity {
    pub fn new(w: Tensor3, m: Tensor3, c_min: f64) -> Result<Self> {
        if !(c_min > 0.0 && c_min < 0.5) {
            return Err(Error::usage(format!("c_min must lie in (0, 1/2), got {c_min}")));
        }
        let [k1, k2, _] = w.dims();
        if k1 != k2 || w.dims() != m.dims() {
            return Err(Error::usage("connectivity tensors must be k x k x L and conform"));
        }
        for (name, t) in [("W", &w), ("M", &m)] {
            for a in 0..k1 {
                for b in 0..k2 {
                    for l in 0..t.dims()[2] {
                        let x = t.get(a, b, l);
                        if (x - t.get(b, a, l)).abs() > 0.0 {
                            return Err(Error::usage(format!("{name} is not symmetric at ({a},{b},{l})")));
                        }
                        if !(c_min..=1.0 - c_min).contains(&x) {
                            return Err(Error::usage(format!(
                                "{name}[{a},{b},{l}] = {x} outside [{c_min}, {}]",
                                1.0 - c_min
                            )));
                        }
                    }
                }
            }
        }
        Ok(Connectivity { w, m, c_min })
    }

    /// Builds a connectivity from per-layer `k x k` row-major blocks.
    pub fn from_layers(w_layers: &[Vec<f64>], m_layers: &[Vec<f64>], c_min: f64) -> Result<Self> {
        if w_layers.len() != m_layers.len() || w_layers.is_empty() {
            return Err(Error::usage("need the same positive number of W and M layers"));
        }
        let k = (w_layers[0].len() as f64).sqrt().round() as usize;
        let build = |layers: &[Vec<f64>]| -> Result<Tensor3> {
            if layers.iter().any(|b| b.len() != k * k) {
                return Err(Error::usage("every layer block must be k x k"));
            }
            Ok(Tensor3::from_fn([k, k, layers.len()], |a, b, l| layers[l][a * k + b]))
        };
        Connectivity::new(build(w_layers)?, build(m_layers)?, c_min)
    }

    pub fn w(&self) -> &Tensor3 {
        &self.w
    }

    pub fn m(&self) -> &Tensor3 {
        &self.m
    }

    pub fn c_min(&self) -> f64 {
        self.c_min
    }

    pub fn k(&self) -> usize {
        self.w.dims()[0]
    }

    pub fn layers(&self) -> usize {
        self.w.dims()[2]
    }

    /// `(1 - s) * self + s * other`.
    pub fn interpolate(&self, other: &Connectivity, s: f64) -> Result<Connectivity> {
        let w = self.w.zip_with(&other.w, |a, b| (1.0 - s) * a + s * b)?;
        let m = self.m.zip_with(&other.m, |a, b| (1.0 - s) * a + s * b)?;
        Connectivity::new(w, m, self.c_min.min(other.c_min))
    }
}

/// How the parameters evolve inside one schedule piece.
#[derive(Debug, Clone, PartialEq)]
pub enum PieceRule {
    Constant(Connectivity),
    /// `(1 - s_t) from + s_t to` with `s_t = (t - origin) / span`.
    Linear {
        from: Connectivity,
        to: Connectivity,
        origin: usize,
        span: usize,
    },
    /// `even` when `floor((t - origin) / period)` is even, `odd` otherwise.
    Alternating {
        even: Connectivity,
        odd: Connectivity,
        origin: usize,
        period: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchedulePiece {
    pub start: usize,
    pub rule: PieceRule,
}

/// Piecewise parameter path over `[1, end]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSchedule {
    pieces: Vec<SchedulePiece>,
    end: usize,
}

impl ParamSchedule {
    pub fn new(pieces: Vec<SchedulePiece>, end: usize) -> Result<Self> {
        if pieces.first().map(|p| p.start) != Some(1) {
            return Err(Error::usage("schedule must start at time 1"));
        }
        if pieces.windows(2).any(|w| w[1].start <= w[0].start) {
            return Err(Error::usage("schedule start times must be strictly increasing"));
        }
        if pieces.last().map(|p| p.start).unwrap_or(1) > end {
            return Err(Error::usage("schedule piece starts after the schedule end"));
        }
        Ok(ParamSchedule { pieces, end })
    }

    /// Time-invariant parameters with no horizon limit.
    pub fn constant(c: Connectivity) -> Self {
        ParamSchedule {
            pieces: vec![SchedulePiece {
                start: 1,
                rule: PieceRule::Constant(c),
            }],
            end: usize::MAX,
        }
    }

    pub fn end(&self) -> usize {
        self.end
    }

    pub fn pieces(&self) -> &[SchedulePiece] {
        &self.pieces
    }

    pub fn at(&self, t: usize) -> Result<Connectivity> {
        if t == 0 || t > self.end {
            return Err(Error::usage(format!("time {t} outside schedule range [1, {}]", self.end)));
        }
        let piece = self
            .pieces
            .iter()
            .rev()
            .find(|p| p.start <= t)
            .expect("first piece starts at 1");
        match &piece.rule {
            PieceRule::Constant(c) => Ok(c.clone()),
            PieceRule::Linear { from, to, origin, span } => {
                let s = (t as f64 - *origin as f64) / *span as f64;
                from.interpolate(to, s.clamp(0.0, 1.0))
            }
            PieceRule::Alternating { even, odd, origin, period } => {
                let phase = (t - origin) / period;
                Ok(if phase % 2 == 0 { even.clone() } else { odd.clone() })
            }
        }
    }
}

/// Symmetric binary `n x n x L` network observation with zero diagonal.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AdjacencySnapshot {
    n: usize,
    layers: usize,
    bits: Vec<u8>,
}

impl AdjacencySnapshot {
    pub fn empty(n: usize, layers: usize) -> Self {
        AdjacencySnapshot {
            n,
            layers,
            bits: vec![0; n * n * layers],
        }
    }

    /// Builds a snapshot from `bits[(i * n + j) * L + l]`, validating symmetry,
    /// the zero diagonal and the 0/1 alphabet.
    pub fn from_bits(n: usize, layers: usize, bits: Vec<u8>) -> Result<Self> {
        if bits.len() != n * n * layers {
            return Err(Error::usage("snapshot buffer has the wrong length"));
        }
        let snap = AdjacencySnapshot { n, layers, bits };
        snap.validate()?;
        Ok(snap)
    }

    pub fn validate(&self) -> Result<()> {
        for i in 0..self.n {
            for l in 0..self.layers {
                if self.bits[self.offset(i, i, l)] != 0 {
                    return Err(Error::usage(format!("self-loop at node {i}, layer {l}")));
                }
            }
            for j in (i + 1)..self.n {
                for l in 0..self.layers {
                    let a = self.bits[self.offset(i, j, l)];
                    if a > 1 {
                        return Err(Error::usage("snapshot entries must be 0 or 1"));
                    }
                    if a != self.bits[self.offset(j, i, l)] {
                        return Err(Error::usage(format!("asymmetric entry ({i},{j},{l})")));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn layers(&self) -> usize {
        self.layers
    }

    /// Raw 0/1 entries laid out like a [`Tensor3`] of dims `[n, n, L]`.
    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    #[inline]
    fn offset(&self, i: usize, j: usize, l: usize) -> usize {
        (i * self.n + j) * self.layers + l
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, l: usize) -> bool {
        self.bits[self.offset(i, j, l)] != 0
    }

    /// Sets both `(i, j, l)` and `(j, i, l)`.
    pub fn set_edge(&mut self, i: usize, j: usize, l: usize, on: bool) -> Result<()> {
        if i == j {
            return Err(Error::usage("self-loops are not allowed"));
        }
        if i >= self.n || j >= self.n || l >= self.layers {
            return Err(Error::usage("edge index out of range"));
        }
        let o1 = self.offset(i, j, l);
        let o2 = self.offset(j, i, l);
        self.bits[o1] = on as u8;
        self.bits[o2] = on as u8;
        Ok(())
    }

    pub fn to_tensor(&self) -> Tensor3 {
        Tensor3::from_vec(
            [self.n, self.n, self.layers],
            self.bits.iter().map(|&b| b as f64).collect(),
        )
        .expect("dims match")
    }

    /// Fraction of present edges among the `L n (n - 1) / 2` node pairs.
    pub fn density(&self) -> f64 {
        let pairs = self.layers * self.n * self.n.saturating_sub(1) / 2;
        if pairs == 0 {
            return 0.0;
        }
        let ones: usize = self.bits.iter().map(|&b| b as usize).sum();
        ones as f64 / 2.0 / pairs as f64
    }
}

/// `Theta_{ijl} = W_{z(i) z(j) l}` and `Delta_{ijl} = M_{z(i) z(j) l}`.
pub fn expand(z: &Membership, c: &Connectivity) -> Result<(Tensor3, Tensor3)> {
    if z.k() != c.k() {
        return Err(Error::usage(format!(
            "membership has {} communities, connectivity {}",
            z.k(),
            c.k()
        )));
    }
    let n = z.n();
    let dims = [n, n, c.layers()];
    let theta = Tensor3::from_fn(dims, |i, j, l| c.w.get(z.label(i), z.label(j), l));
    let delta = Tensor3::from_fn(dims, |i, j, l| c.m.get(z.label(i), z.label(j), l));
    Ok((theta, delta))
}

/// Stationary edge probability `Theta / (Theta + Delta)`.
pub fn stationary_marginal(theta: &Tensor3, delta: &Tensor3) -> Result<Tensor3> {
    if theta.dims() != delta.dims() {
        return Err(Error::usage("marginal needs conforming tensors"));
    }
    if theta.data().iter().zip(delta.data()).any(|(a, b)| !(a + b > 0.0)) {
        return Err(Error::usage("Theta + Delta must be positive everywhere"));
    }
    theta.zip_with(delta, |a, b| a / (a + b))
}

/// Law of the initial snapshot `A^0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitRule {
    /// `P(A^0 = 1) = Theta^1 / (Theta^1 + Delta^1)`.
    StationaryMarginal,
    /// `A^0 = 0`.
    Empty,
}

/// Simulates `A^0, ..., A^{t_max}` from a block model and parameter schedule.
pub fn simulate(
    z: &Membership,
    schedule: &ParamSchedule,
    t_max: usize,
    seed: u64,
    init: InitRule,
) -> Result<Vec<AdjacencySnapshot>> {
    if t_max == 0 {
        return Err(Error::usage("t_max must be at least 1"));
    }
    if schedule.end() < t_max {
        return Err(Error::usage(format!(
            "schedule covers [1, {}] but t_max = {t_max}",
            schedule.end()
        )));
    }
    let first = schedule.at(1)?;
    let layers = first.layers();
    let initial = match init {
        InitRule::StationaryMarginal => {
            let (theta, delta) = expand(z, &first)?;
            Some(stationary_marginal(&theta, &delta)?)
        }
        InitRule::Empty => None,
    };
    let mut cached: Option<(Connectivity, Tensor3, Tensor3)> = None;
    simulate_chain(z.n(), layers, initial.as_ref(), t_max, seed, |t| {
        let c = schedule.at(t)?;
        match &cached {
            Some((prev, th, de)) if *prev == c => Ok((th.clone(), de.clone())),
            _ => {
                let (th, de) = expand(z, &c)?;
                cached = Some((c, th.clone(), de.clone()));
                Ok((th, de))
            }
        }
    })
}

/// Simulates with edgewise, time-invariant transition probabilities.
pub fn simulate_edgewise(
    theta: &Tensor3,
    delta: &Tensor3,
    t_max: usize,
    seed: u64,
    init: InitRule,
) -> Result<Vec<AdjacencySnapshot>> {
    let [n, n2, layers] = theta.dims();
    if n != n2 || theta.dims() != delta.dims() {
        return Err(Error::usage("edgewise parameters must be n x n x L and conform"));
    }
    let initial = match init {
        InitRule::StationaryMarginal => Some(stationary_marginal(theta, delta)?),
        InitRule::Empty => None,
    };
    simulate_chain(n, layers, initial.as_ref(), t_max, seed, |_| {
        Ok((theta.clone(), delta.clone()))
    })
}

/// Core edge-refresh recursion. Only entries with `i < j` are drawn; the
/// lower triangle mirrors them and the diagonal stays zero. Time step `t`
/// draws from its own ChaCha stream, so the trajectory is a pure function of
/// `seed` regardless of how steps are scheduled.
fn simulate_chain(
    n: usize,
    layers: usize,
    initial: Option<&Tensor3>,
    t_max: usize,
    seed: u64,
    mut law: impl FnMut(usize) -> Result<(Tensor3, Tensor3)>,
) -> Result<Vec<AdjacencySnapshot>> {
    let mut out = Vec::with_capacity(t_max + 1);
    let mut current = AdjacencySnapshot::empty(n, layers);
    if let Some(pi) = initial {
        let mut rng = stream_rng(seed, 0);
        for_each_pair(n, layers, |i, j, l| {
            let u: f64 = rng.random();
            if u < pi.get(i, j, l) {
                mirror_set(&mut current, i, j, l, 1);
            }
        });
    }
    out.push(current.clone());
    for t in 1..=t_max {
        let (theta, delta) = law(t)?;
        if theta.dims() != [n, n, layers] || delta.dims() != [n, n, layers] {
            return Err(Error::usage("transition law returned tensors of the wrong shape"));
        }
        let mut rng = stream_rng(seed, t as u64);
        for_each_pair(n, layers, |i, j, l| {
            let u: f64 = rng.random();
            // E = 1 on [0, Theta) and E = -1 on [1 - Delta, 1). When
            // Theta + Delta > 1 (bootstrap fits) the two events overlap, but
            // only the one relevant to the current state is ever read, so the
            // chain still has the right conditional transition law.
            let next = if current.get(i, j, l) {
                u < 1.0 - delta.get(i, j, l)
            } else {
                u < theta.get(i, j, l)
            };
            mirror_set(&mut current, i, j, l, next as u8);
        });
        out.push(current.clone());
    }
    Ok(out)
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[inline]
fn mirror_set(a: &mut AdjacencySnapshot, i: usize, j: usize, l: usize, v: u8) {
    let o1 = a.offset(i, j, l);
    let o2 = a.offset(j, i, l);
    a.bits[o1] = v;
    a.bits[o2] = v;
}

fn for_each_pair(n: usize, layers: usize, mut f: impl FnMut(usize, usize, usize)) {
    for l in 0..layers {
        for i in 0..n {
            for j in (i + 1)..n {
                f(i, j, l);
            }
        }
    }
}

/// The eight benchmark settings: four stationary, four non-stationary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ScenarioId {
    Stationary(u8),
    NonStationary(u8),
}

impl ScenarioId {
    pub const ALL: [ScenarioId; 8] = [
        ScenarioId::Stationary(1),
        ScenarioId::Stationary(2),
        ScenarioId::Stationary(3),
        ScenarioId::Stationary(4),
        ScenarioId::NonStationary(1),
        ScenarioId::NonStationary(2),
        ScenarioId::NonStationary(3),
        ScenarioId::NonStationary(4),
    ];

    pub fn is_stationary(self) -> bool {
        matches!(self, ScenarioId::Stationary(_))
    }
}

impl fmt::Display for ScenarioId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScenarioId::Stationary(k) => write!(f, "stat-{k}"),
            ScenarioId::NonStationary(k) => write!(f, "nonstat-{k}"),
        }
    }
}

impl FromStr for ScenarioId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parse = |rest: &str| rest.parse::<u8>().ok().filter(|k| (1..=4).contains(k));
        let id = if let Some(rest) = s.strip_prefix("nonstat-") {
            parse(rest).map(ScenarioId::NonStationary)
        } else if let Some(rest) = s.strip_prefix("stat-") {
            parse(rest).map(ScenarioId::Stationary)
        } else {
            None
        };
        id.ok_or_else(|| Error::usage(format!("unknown scenario '{s}' (expected stat-1..4 or nonstat-1..4)")))
    }
}

/// Optional size overrides for a scenario.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ScenarioSize {
    pub n: Option<usize>,
    pub t_max: Option<usize>,
}

/// A fully specified simulation setting with its ground truth.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub id: ScenarioId,
    pub membership: Membership,
    pub schedule: ParamSchedule,
    pub horizon: usize,
    pub init: InitRule,
}

/// Floor shared by all scenario parameters.
pub const SCENARIO_C_MIN: f64 = 0.01;

impl Scenario {
    /// `(Theta^t, Delta^t)` for `t` in `[1, horizon]`.
    pub fn truth_at(&self, t: usize) -> Result<(Tensor3, Tensor3)> {
        expand(&self.membership, &self.schedule.at(t)?)
    }

    pub fn simulate(&self, seed: u64) -> Result<Vec<AdjacencySnapshot>> {
        simulate(&self.membership, &self.schedule, self.horizon, seed, self.init)
    }
}

fn two_block(diag1: (f64, f64), diag2: (f64, f64), off: (f64, f64)) -> (Vec<f64>, Vec<f64>) {
    (
        vec![diag1.0, off.0, off.0, diag2.0],
        vec![diag1.1, off.1, off.1, diag2.1],
    )
}

fn two_layer(layers: [(Vec<f64>, Vec<f64>); 2]) -> Result<Connectivity> {
    let [(w1, m1), (w2, m2)] = layers;
    Connectivity::from_layers(&[w1, w2], &[m1, m2], SCENARIO_C_MIN)
}

fn same_layers(w: f64, w_off: f64, m: f64, m_off: f64) -> Result<Connectivity> {
    let block = two_block((w, m), (w, m), (w_off, m_off));
    two_layer([block.clone(), block])
}

/// The four connectivity regimes used by the non-stationary scenarios.
pub fn nonstationary_regime(index: u8) -> Result<Connectivity> {
    match index {
        1 => same_layers(0.10, 0.05, 0.20, 0.05),
        2 => same_layers(0.15, 0.05, 0.25, 0.05),
        3 => same_layers(0.35, 0.05, 0.45, 0.05),
        4 => same_layers(0.50, 0.05, 0.50, 0.05),
        _ => Err(Error::usage(format!("no regime {index}"))),
    }
}

/// Parameters of the stationary scenarios.
pub fn stationary_connectivity(index: u8) -> Result<Connectivity> {
    match index {
        // Weak signal in transitions and marginals.
        1 => {
            let b = two_block((0.10, 0.20), (0.08, 0.20), (0.05, 0.20));
            two_layer([b.clone(), b])
        }
        // Marginals flat at 1/2; only transitions differ.
        2 => {
            let b = two_block((0.4, 0.4), (0.2, 0.2), (0.3, 0.3));
            two_layer([b.clone(), b])
        }
        // Layers with opposite assortativity.
        3 => two_layer([
            two_block((0.4, 0.4), (0.4, 0.4), (0.05, 0.45)),
            two_block((0.05, 0.45), (0.05, 0.45), (0.4, 0.4)),
        ]),
        // Sparse informative layer plus a dense uninformative one.
        4 => two_layer([
            two_block((0.015, 0.09), (0.015, 0.09), (0.010, 0.10)),
            two_block((0.15, 0.35), (0.15, 0.35), (0.15, 0.35)),
        ]),
        _ => Err(Error::usage(format!("no stationary scenario {index}"))),
    }
}

/// Builds a benchmark scenario. Defaults: `n = 100`, `K = 2`, `L = 2`, with
/// `T = 300` (stationary) or `T = 175` (non-stationary, changes after
/// `t = 50` and `t = 100`).
pub fn make_scenario(id: ScenarioId, size: ScenarioSize) -> Result<Scenario> {
    let n = size.n.unwrap_or(100);
    let membership = Membership::balanced(n, 2)?;
    let (schedule, horizon) = match id {
        ScenarioId::Stationary(k) => {
            let horizon = size.t_max.unwrap_or(300);
            let mut schedule = ParamSchedule::constant(stationary_connectivity(k)?);
            schedule.end = horizon;
            (schedule, horizon)
        }
        ScenarioId::NonStationary(k) => {
            let horizon = size.t_max.unwrap_or(175);
            let r = |i| nonstationary_regime(i);
            let constant = |start, c| SchedulePiece {
                start,
                rule: PieceRule::Constant(c),
            };
            let middle = match k {
                1 => PieceRule::Constant(r(2)?),
                2 => PieceRule::Constant(r(3)?),
                3 => PieceRule::Linear {
                    from: r(1)?,
                    to: r(4)?,
                    origin: 51,
                    span: 49,
                },
                4 => PieceRule::Alternating {
                    even: r(2)?,
                    odd: r(3)?,
                    origin: 51,
                    period: 2,
                },
                _ => return Err(Error::usage(format!("no non-stationary scenario {k}"))),
            };
            let mut pieces = vec![constant(1, r(1)?)];
            if horizon >= 51 {
                pieces.push(SchedulePiece { start: 51, rule: middle });
            }
            if horizon >= 101 {
                pieces.push(constant(101, r(4)?));
            }
            (ParamSchedule::new(pieces, horizon)?, horizon)
        }
    };
    Ok(Scenario {
        id,
        membership,
        schedule,
        horizon,
        init: InitRule::StationaryMarginal,
    })
}
