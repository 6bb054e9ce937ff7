//! Community recovery from the node subspace and partition-agreement metrics.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::Membership;
use crate::tensor::Matrix;

/// Lloyd iterations per restart.
pub const KMEANS_MAX_ITERS: usize = 100;
/// Convergence threshold on the largest center displacement.
pub const KMEANS_TOL: f64 = 1e-9;
pub const DEFAULT_RESTARTS: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterResult {
    /// Cluster index in `0..K` per row.
    pub labels: Vec<usize>,
    /// `K x d`, one center per row.
    pub centers: Matrix,
    /// Within-cluster sum of squared distances.
    pub inertia: f64,
}

/// K-means on the rows of `u_z`, seeded k-means++ style and keeping the best
/// of `restarts` runs.
pub fn kmeans_membership(u_z: &Matrix, k: usize, restarts: usize, seed: u64) -> Result<ClusterResult> {
    let (n, d) = u_z.shape();
    if k == 0 || n < k {
        return Err(Error::usage(format!("k-means needs 1 <= K <= n, got K = {k}, n = {n}")));
    }
    if u_z.iter().any(|x| !x.is_finite()) {
        return Err(Error::usage("k-means input has non-finite entries"));
    }
    let points: Vec<Vec<f64>> = (0..n).map(|i| u_z.row(i).iter().copied().collect()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<ClusterResult> = None;
    for _ in 0..restarts.max(1) {
        let run = lloyd(&points, k, d, &mut rng);
        if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn seed_centers(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut centers = vec![points[rng.random_range(0..n)].clone()];
    let mut nearest: Vec<f64> = points.iter().map(|p| sq_dist(p, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = nearest.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &w) in nearest.iter().enumerate() {
                if w > 0.0 && target < w {
                    chosen = i;
                    break;
                }
                target -= w;
            }
            if nearest[chosen] == 0.0 {
                chosen = nearest.iter().rposition(|&w| w > 0.0).unwrap_or(chosen);
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        let c = points[pick].clone();
        for (w, p) in nearest.iter_mut().zip(points) {
            *w = w.min(sq_dist(p, &c));
        }
        centers.push(c);
    }
    centers
}

fn assign(points: &[Vec<f64>], centers: &[Vec<f64>], labels: &mut [usize]) -> f64 {
    let mut inertia = 0.0;
    for (p, label) in points.iter().zip(labels.iter_mut()) {
        let mut best = (f64::INFINITY, 0);
        for (c, center) in centers.iter().enumerate() {
            let dist = sq_dist(p, center);
            if dist < best.0 {
                best = (dist, c);
            }
        }
        *label = best.1;
        inertia += best.0;
    }
    inertia
}

fn lloyd(points: &[Vec<f64>], k: usize, d: usize, rng: &mut ChaCha8Rng) -> ClusterResult {
    let n = points.len();
    let mut centers = seed_centers(points, k, rng);
    let mut labels = vec![0; n];
    let mut inertia = assign(points, &centers, &mut labels);
    for _ in 0..KMEANS_MAX_ITERS {
        let mut sums = vec![vec![0.0; d]; k];
        let mut counts = vec![0usize; k];
        for (p, &c) in points.iter().zip(&labels) {
            counts[c] += 1;
            for (s, x) in sums[c].iter_mut().zip(p) {
                *s += x;
            }
        }
        // An empty cluster takes over the point farthest from its center.
        for c in 0..k {
            if counts[c] > 0 {
                continue;
            }
            let far = (0..n)
                .filter(|&i| counts[labels[i]] > 1)
                .max_by(|&a, &b| {
                    sq_dist(&points[a], &centers[labels[a]]).total_cmp(&sq_dist(&points[b], &centers[labels[b]]))
                });
            if let Some(i) = far {
                let old = labels[i];
                counts[old] -= 1;
                for (s, x) in sums[old].iter_mut().zip(&points[i]) {
                    *s -= x;
                }
                labels[i] = c;
                counts[c] = 1;
                sums[c] = points[i].clone();
            }
        }
        let mut shift = 0.0_f64;
        for c in 0..k {
            if counts[c] == 0 {
                continue;
            }
            let next: Vec<f64> = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            shift = shift.max(sq_dist(&next, &centers[c]).sqrt());
            centers[c] = next;
        }
        inertia = assign(points, &centers, &mut labels);
        if shift <= KMEANS_TOL {
            break;
        }
    }
    let mut m = Matrix::zeros(k, d);
    for (c, center) in centers.iter().enumerate() {
        for (j, &x) in center.iter().enumerate() {
            m[(c, j)] = x;
        }
    }
    ClusterResult {
        labels,
        centers: m,
        inertia,
    }
}

/// Membership with labels renumbered by order of first appearance.
pub fn extract_membership(cluster: &ClusterResult) -> Membership {
    let k = cluster.centers.nrows().max(1);
    let mut map = vec![usize::MAX; cluster.labels.iter().max().map_or(0, |m| m + 1).max(k)];
    let mut next = 0;
    let labels = cluster
        .labels
        .iter()
        .map(|&l| {
            if map[l] == usize::MAX {
                map[l] = next;
                next += 1;
            }
            map[l]
        })
        .collect();
    Membership::new(labels, k.max(next)).expect("canonical labels are in range")
}

fn contingency(u: &Membership, v: &Membership) -> Vec<Vec<usize>> {
    let mut table = vec![vec![0usize; v.k()]; u.k()];
    for (&a, &b) in u.labels().iter().zip(v.labels()) {
        table[a][b] += 1;
    }
    table
}

/// Fraction of nodes misclassified, minimized over relabelings of `z_hat`.
pub fn hamming_loss(z_hat: &Membership, z: &Membership) -> Result<f64> {
    if z_hat.n() != z.n() || z_hat.k() != z.k() {
        return Err(Error::usage(format!(
            "hamming loss needs equal sizes, got (n={}, K={}) and (n={}, K={})",
            z_hat.n(),
            z_hat.k(),
            z.n(),
            z.k()
        )));
    }
    let n = z.n();
    if n == 0 {
        return Ok(0.0);
    }
    let table = contingency(z_hat, z);
    let agree = if z.k() <= 8 {
        best_permutation_brute(&table)
    } else {
        best_assignment(&table)
    };
    Ok((n - agree) as f64 / n as f64)
}

fn best_permutation_brute(table: &[Vec<usize>]) -> usize {
    fn go(table: &[Vec<usize>], row: usize, used: &mut [bool], acc: usize, best: &mut usize) {
        if row == table.len() {
            *best = (*best).max(acc);
            return;
        }
        for c in 0..used.len() {
            if !used[c] {
                used[c] = true;
                go(table, row + 1, used, acc + table[row][c], best);
                used[c] = false;
            }
        }
    }
    let mut best = 0;
    go(table, 0, &mut vec![false; table.len()], 0, &mut best);
    best
}

/// Maximum-weight perfect matching on a square table (Hungarian method on
/// the negated weights).
fn best_assignment(table: &[Vec<usize>]) -> usize {
    let k = table.len();
    let big = table.iter().flatten().copied().max().unwrap_or(0) as i64;
    let cost = |i: usize, j: usize| big - table[i][j] as i64;
    let mut u = vec![0i64; k + 1];
    let mut v = vec![0i64; k + 1];
    let mut p = vec![0usize; k + 1];
    let mut way = vec![0usize; k + 1];
    for i in 1..=k {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![i64::MAX; k + 1];
        let mut used = vec![false; k + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = i64::MAX;
            let mut j1 = 0;
            for j in 1..=k {
                if !used[j] {
                    let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=k {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    (1..=k).map(|j| table[p[j] - 1][j - 1]).sum()
}

fn choose2(x: usize) -> f64 {
    let x = x as f64;
    x * (x - 1.0) / 2.0
}

/// Adjusted Rand index from the contingency table. Two partitions that are
/// both trivial (all one block, or all singletons) score 1.
pub fn adjusted_rand_index(u: &Membership, v: &Membership) -> Result<f64> {
    if u.n() != v.n() {
        return Err(Error::usage(format!("ARI needs equal n, got {} and {}", u.n(), v.n())));
    }
    if u.n() < 2 {
        return Err(Error::usage("ARI needs at least two nodes"));
    }
    let table = contingency(u, v);
    let a: f64 = table.iter().flatten().map(|&x| choose2(x)).sum();
    let b: f64 = table.iter().map(|row| choose2(row.iter().sum())).sum();
    let c: f64 = (0..v.k())
        .map(|j| choose2(table.iter().map(|row| row[j]).sum()))
        .sum();
    let n2 = choose2(u.n());
    let expected = b * c / n2;
    let num = a - expected;
    let den = (b + c) / 2.0 - expected;
    if den == 0.0 {
        return Ok(if num == 0.0 { 1.0 } else { f64::NAN });
    }
    Ok(num / den)
}

/// Share of nodes whose community changes between consecutive estimates,
/// after matching labels.
pub fn switch_rate(prev: &Membership, cur: &Membership) -> Result<f64> {
    hamming_loss(cur, prev)
}
