//! Independent reference implementations shared by the integration tests.
//! Nothing here calls into the estimators it is used to check.

#![allow(dead_code)]

use armsbm::model::{simulate_edgewise, AdjacencySnapshot, InitRule, Membership};
use armsbm::{Matrix, Tensor3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `A^0, ..., A^T` with edgewise parameters drawn uniformly from `[0.02, 0.98]`.
pub fn random_series(seed: u64, n: usize, layers: usize, t_max: usize) -> Vec<AdjacencySnapshot> {
    let mut r = rng(seed);
    let mut draw = || Tensor3::from_fn([n, n, layers], |_, _, _| r.random_range(0.02..0.98));
    let theta = symmetrize(&draw());
    let delta = symmetrize(&draw());
    simulate_edgewise(&theta, &delta, t_max, seed ^ 0xA5A5, InitRule::StationaryMarginal).unwrap()
}

fn symmetrize(t: &Tensor3) -> Tensor3 {
    let [n, _, layers] = t.dims();
    Tensor3::from_fn([n, n, layers], |i, j, l| t.get(i.min(j), i.max(j), l))
}

/// Transition counts `[c01, c00, c10, c11]` of one entry over the steps
/// `t - k + 1, ..., t`, read straight off the snapshots.
pub fn recount(snaps: &[AdjacencySnapshot], t: usize, k: usize, i: usize, j: usize, l: usize) -> [u32; 4] {
    let mut c = [0u32; 4];
    for s in (t + 1 - k)..=t {
        let (a, b) = (snaps[s - 1].get(i, j, l), snaps[s].get(i, j, l));
        let slot = match (a, b) {
            (false, true) => 0,
            (false, false) => 1,
            (true, false) => 2,
            (true, true) => 3,
        };
        c[slot] += 1;
    }
    c
}

/// `(theta, delta)` of one entry from raw counts; `None` when degenerate.
pub fn raw_mle(c: [u32; 4]) -> (Option<f64>, Option<f64>) {
    let ratio = |hit: u32, miss: u32| (hit + miss > 0).then(|| hit as f64 / (hit + miss) as f64);
    (ratio(c[0], c[1]), ratio(c[2], c[3]))
}

/// Loss gap between windows `k_small < k_large` at time `t`, rescanning the
/// raw snapshots edge by edge.
pub fn raw_loss_gap(snaps: &[AdjacencySnapshot], t: usize, k_small: usize, k_large: usize, clamp: f64) -> f64 {
    let a = &snaps[0];
    let mut worst = 0.0_f64;
    for i in 0..a.n() {
        for j in (i + 1)..a.n() {
            for l in 0..a.layers() {
                let cs = recount(snaps, t, k_small, i, j, l);
                let cl = recount(snaps, t, k_large, i, j, l);
                let (Some(ts), Some(ds)) = raw_mle(cs) else { continue };
                let (Some(tl), Some(dl)) = raw_mle(cl) else { continue };
                let f = |th: f64, de: f64| {
                    let (th, de) = (th.clamp(clamp, 1.0 - clamp), de.clamp(clamp, 1.0 - clamp));
                    let terms = [
                        (cs[0], th.ln()),
                        (cs[1], (1.0 - th).ln()),
                        (cs[2], de.ln()),
                        (cs[3], (1.0 - de).ln()),
                    ];
                    -terms
                        .iter()
                        .filter(|(c, _)| *c > 0)
                        .map(|(c, lg)| *c as f64 * lg)
                        .sum::<f64>()
                        / k_small as f64
                };
                worst = worst.max(f(tl, dl) - f(ts, ds));
            }
        }
    }
    worst
}

/// Cyclic Jacobi eigen-decomposition of a symmetric matrix. Eigenvalues are
/// returned in decreasing order with matching eigenvector columns.
pub fn jacobi_eigen(a: &Matrix) -> (Vec<f64>, Matrix) {
    let n = a.nrows();
    let mut m = a.clone();
    let mut v = Matrix::identity(n, n);
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|p| (0..n).filter(move |&q| q != p).map(move |q| (p, q)))
            .map(|(p, q)| m[(p, q)].powi(2))
            .sum();
        if off.sqrt() < 1e-15 * (1.0 + m.norm()) {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[(k, p)], m[(k, q)]);
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[(p, k)], m[(q, k)]);
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| m[(y, y)].total_cmp(&m[(x, x)]));
    let vals = order.iter().map(|&i| m[(i, i)]).collect();
    let vecs = Matrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    (vals, vecs)
}

/// Singular values of `a` via the eigenvalues of `a^T a` or `a a^T`.
pub fn jacobi_singular_values(a: &Matrix) -> Vec<f64> {
    let g = if a.nrows() <= a.ncols() {
        a * a.transpose()
    } else {
        a.transpose() * a
    };
    jacobi_eigen(&g).0.into_iter().map(|x| x.max(0.0).sqrt()).collect()
}

/// First `r` columns of `m`.
pub fn leading(m: &Matrix, r: usize) -> Matrix {
    m.columns(0, r).into_owned()
}

/// Largest principal-angle sine between two orthonormal bases.
pub fn sin_theta(u1: &Matrix, u2: &Matrix) -> f64 {
    let residual = u1 - u2 * (u2.transpose() * u1);
    jacobi_singular_values(&residual).first().copied().unwrap_or(0.0)
}

/// Random `n x r` orthonormal basis.
pub fn random_basis(r: &mut ChaCha8Rng, n: usize, k: usize) -> Matrix {
    let g = Matrix::from_fn(n, k, |_, _| gaussian(r));
    g.qr().q()
}

pub fn gaussian(r: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = r.random_range(f64::EPSILON..1.0);
    let u2: f64 = r.random::<f64>();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Misclassification rate minimized over all relabelings, by enumeration.
pub fn brute_hamming(a: &[usize], b: &[usize], k: usize) -> f64 {
    let mut perm: Vec<usize> = (0..k).collect();
    let mut best = usize::MAX;
    permute(&mut perm, 0, &mut |p| {
        let miss = a.iter().zip(b).filter(|(x, y)| p[**x] != **y).count();
        best = best.min(miss);
    });
    best as f64 / a.len() as f64
}

fn permute(p: &mut Vec<usize>, at: usize, f: &mut impl FnMut(&[usize])) {
    if at == p.len() {
        f(p);
        return;
    }
    for i in at..p.len() {
        p.swap(at, i);
        permute(p, at + 1, f);
        p.swap(at, i);
    }
}

/// Adjusted Rand index by counting node pairs directly.
pub fn pair_count_ari(a: &[usize], b: &[usize]) -> f64 {
    let n = a.len();
    let (mut both, mut only_a, mut only_b, mut pairs) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..n {
        for j in (i + 1)..n {
            let sa = a[i] == a[j];
            let sb = b[i] == b[j];
            pairs += 1.0;
            if sa && sb {
                both += 1.0;
            }
            if sa {
                only_a += 1.0;
            }
            if sb {
                only_b += 1.0;
            }
        }
    }
    let expected = only_a * only_b / pairs;
    (both - expected) / ((only_a + only_b) / 2.0 - expected)
}

pub fn membership(labels: &[usize], k: usize) -> Membership {
    Membership::new(labels.to_vec(), k).unwrap()
}
