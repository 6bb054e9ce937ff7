//! Low-rank refinement: heteroskedastic PCA on mode Gram matrices and the
//! Tucker projection of the raw transition estimates.

use nalgebra::SymmetricEigen;

use crate::error::{Error, Result};
use crate::tensor::{sign_flip_needed, Matrix, Tensor3};

/// Stopping rule for [`hpca`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HpcaConfig {
    pub max_iters: usize,
    /// Stop once the imputed diagonal moves by at most this much (max norm).
    pub tol: f64,
}

impl Default for HpcaConfig {
    fn default() -> Self {
        HpcaConfig {
            max_iters: 50,
            tol: 1e-9,
        }
    }
}

/// Output of [`hpca`].
#[derive(Debug, Clone)]
pub struct HpcaResult {
    /// `n x r`, orthonormal columns.
    pub basis: Matrix,
    /// Number of diagonal imputation rounds performed.
    pub iterations: usize,
    /// Last change of the imputed diagonal.
    pub last_change: f64,
}

/// Heteroskedastic PCA of a symmetric matrix.
///
/// The diagonal is deleted, then repeatedly replaced by the diagonal of the
/// current best rank-`r` approximation; the returned basis spans the top `r`
/// eigendirections of the final matrix.
///
/// The input is a Gram matrix, so the rank-`r` fit keeps the largest
/// eigenvalues, not the largest in magnitude. The negative eigenvalues left
/// by deleting a dominant diagonal have node-localized eigenvectors, and once
/// admitted into the fit the imputation keeps them there.
pub fn hpca(sigma: &Matrix, r: usize, cfg: &HpcaConfig) -> Result<HpcaResult> {
    let n = sigma.nrows();
    if sigma.ncols() != n {
        return Err(Error::usage("H-PCA needs a square matrix"));
    }
    if r == 0 || r > n {
        return Err(Error::usage(format!("H-PCA rank {r} invalid for a {n} x {n} matrix")));
    }
    if sigma.iter().any(|x| !x.is_finite()) {
        return Err(Error::usage("H-PCA input has non-finite entries"));
    }
    let scale = sigma.amax().max(1.0);
    if (sigma - sigma.transpose()).amax() > 1e-9 * scale {
        return Err(Error::usage("H-PCA input is not symmetric"));
    }
    let mut work = sigma.clone();
    work.fill_diagonal(0.0);

    let mut warm = None;
    let mut iterations = 0;
    let mut last_change = f64::INFINITY;
    while iterations < cfg.max_iters {
        let (values, vectors) = top_eigen(&work, r, &mut warm);
        let mut change = 0.0_f64;
        for i in 0..n {
            let d: f64 = values
                .iter()
                .enumerate()
                .map(|(c, &lam)| lam * vectors[(i, c)] * vectors[(i, c)])
                .sum();
            change = change.max((d - work[(i, i)]).abs());
            work[(i, i)] = d;
        }
        iterations += 1;
        last_change = change;
        if change <= cfg.tol {
            break;
        }
    }
    let (_, basis) = top_eigen(&work, r, &mut warm);
    Ok(HpcaResult {
        basis,
        iterations,
        last_change,
    })
}

/// Extra Ritz vectors carried by the subspace iteration.
const SUBSPACE_PAD: usize = 6;
/// Matrices up to this size always go to the dense solver.
const DENSE_CUTOFF: usize = 32;
const SUBSPACE_MAX_ITERS: usize = 300;
/// Residual bound `||A v - lambda v|| <= tol * ||A||_F` for convergence.
const SUBSPACE_TOL: f64 = 1e-12;

/// The `r` largest eigenpairs of a symmetric matrix, in decreasing order,
/// each column signed so that its largest-magnitude entry is positive.
///
/// Without a warm start, or for small matrices, this is a dense solve whose
/// leading eigenvectors seed `warm`. With one, it runs subspace iteration
/// with Rayleigh-Ritz extraction from `warm`, falling back to the dense solve
/// if the top `r` do not converge. `warm` holds the final block either way.
fn top_eigen(a: &Matrix, r: usize, warm: &mut Option<Matrix>) -> (Vec<f64>, Matrix) {
    let n = a.nrows();
    let p = (r + SUBSPACE_PAD).min(n);
    let norm = a.norm();
    let start = warm.take().filter(|w| w.shape() == (n, p));
    let (Some(mut q), false) = (start, n <= DENSE_CUTOFF || p >= n || norm == 0.0) else {
        return dense_top_eigen(a, r, p, warm);
    };
    for _ in 0..SUBSPACE_MAX_ITERS {
        let z = a * &q;
        let mut h = q.transpose() * &z;
        h = (&h + h.transpose()) * 0.5;
        let eig = SymmetricEigen::new(h);
        let order = desc_order(eig.eigenvalues.as_slice());
        let mut w = Matrix::zeros(p, p);
        for (dst, &src) in order.iter().enumerate() {
            w.set_column(dst, &eig.eigenvectors.column(src));
        }
        let v = &q * &w;
        let av = &z * &w;
        let converged = (0..r).all(|c| {
            let lam = eig.eigenvalues[order[c]];
            (av.column(c) - v.column(c) * lam).norm() <= SUBSPACE_TOL * norm
        });
        if converged {
            let values = order[..r].iter().map(|&c| eig.eigenvalues[c]).collect();
            let vectors = signed_columns(v.columns(0, r).into_owned());
            *warm = Some(v);
            return (values, vectors);
        }
        q = av.qr().q();
    }
    dense_top_eigen(a, r, p, warm)
}

fn desc_order(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&x, &y| values[y].total_cmp(&values[x]).then(x.cmp(&y)));
    order
}

fn signed_columns(mut m: Matrix) -> Matrix {
    for mut col in m.column_iter_mut() {
        if sign_flip_needed(col.as_slice()) {
            col.neg_mut();
        }
    }
    m
}

fn dense_top_eigen(a: &Matrix, r: usize, p: usize, warm: &mut Option<Matrix>) -> (Vec<f64>, Matrix) {
    let n = a.nrows();
    let eig = SymmetricEigen::new(a.clone());
    let order = desc_order(eig.eigenvalues.as_slice());
    let mut block = Matrix::zeros(n, p);
    for (dst, &src) in order.iter().take(p).enumerate() {
        block.set_column(dst, &eig.eigenvectors.column(src));
    }
    let values = order[..r].iter().map(|&c| eig.eigenvalues[c]).collect();
    let vectors = signed_columns(block.columns(0, r).into_owned());
    *warm = Some(block);
    (values, vectors)
}

/// Ranks and H-PCA settings for the refinement stage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefineConfig {
    /// Number of communities (rank of the node modes).
    pub k_rank: usize,
    /// Layer-mode rank of `Theta`.
    pub r1: usize,
    /// Layer-mode rank of `Delta`.
    pub r2: usize,
    pub hpca: HpcaConfig,
}

impl RefineConfig {
    pub fn new(k_rank: usize, r1: usize, r2: usize) -> Self {
        RefineConfig {
            k_rank,
            r1,
            r2,
            hpca: HpcaConfig::default(),
        }
    }

    pub fn validate(&self, n: usize, layers: usize) -> Result<()> {
        if self.k_rank == 0 || self.k_rank > n {
            return Err(Error::usage(format!("rank K = {} invalid for n = {n}", self.k_rank)));
        }
        for (name, r) in [("r1", self.r1), ("r2", self.r2)] {
            if r == 0 || r > layers {
                return Err(Error::usage(format!("{name} = {r} invalid for L = {layers}")));
            }
        }
        Ok(())
    }
}

/// Estimated singular subspaces of the node and layer modes.
#[derive(Debug, Clone)]
pub struct SubspaceSet {
    /// `n x K`.
    pub u_z: Matrix,
    /// `L x r1`.
    pub u_w: Matrix,
    /// `L x r2`.
    pub u_m: Matrix,
    pub refreshed_at: usize,
    /// H-PCA rounds used for `(u_z, u_w, u_m)`.
    pub iterations: [usize; 3],
}

/// Node subspace from the mode-1 Gram of `theta + delta`, layer subspaces
/// from the mode-3 Grams of `theta` and `delta`.
pub fn estimate_subspaces(theta: &Tensor3, delta: &Tensor3, cfg: &RefineConfig) -> Result<SubspaceSet> {
    if theta.dims() != delta.dims() {
        return Err(Error::usage("theta and delta estimates must conform"));
    }
    let [n, _, layers] = theta.dims();
    cfg.validate(n, layers)?;
    let sum = theta + delta;
    let z = hpca(&sum.gram(1)?, cfg.k_rank, &cfg.hpca)?;
    let w = hpca(&theta.gram(3)?, cfg.r1, &cfg.hpca)?;
    let m = hpca(&delta.gram(3)?, cfg.r2, &cfg.hpca)?;
    Ok(SubspaceSet {
        u_z: z.basis,
        u_w: w.basis,
        u_m: m.basis,
        refreshed_at: 0,
        iterations: [z.iterations, w.iterations, m.iterations],
    })
}

/// `t x1 U U^T x2 U U^T x3 V V^T`, computed through the `K x K x r` core.
pub fn project_tucker(t: &Tensor3, u: &Matrix, v: &Matrix) -> Result<Tensor3> {
    let core = t
        .mode_product(&u.transpose(), 1)?
        .mode_product(&u.transpose(), 2)?
        .mode_product(&v.transpose(), 3)?;
    core.mode_product(u, 1)?.mode_product(u, 2)?.mode_product(v, 3)
}

/// Projects both raw estimates onto the estimated Tucker subspaces.
pub fn project_lowrank(theta: &Tensor3, delta: &Tensor3, s: &SubspaceSet) -> Result<(Tensor3, Tensor3)> {
    Ok((
        project_tucker(theta, &s.u_z, &s.u_w)?,
        project_tucker(delta, &s.u_z, &s.u_m)?,
    ))
}

/// True when a refresh is due at time `t` given the current power `m`,
/// i.e. `t >= 2^m`.
pub fn refresh_schedule(t: usize, last_power: u32) -> bool {
    match 1usize.checked_shl(last_power) {
        Some(threshold) if last_power < usize::BITS => t >= threshold,
        _ => false,
    }
}

/// Refresh counter for the power-of-two schedule.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PowerOfTwoSchedule {
    power: u32,
}

impl PowerOfTwoSchedule {
    /// Returns whether to refresh at `t`, advancing the power if so.
    pub fn tick(&mut self, t: usize) -> bool {
        if refresh_schedule(t, self.power) {
            self.power += 1;
            true
        } else {
            false
        }
    }

    pub fn power(&self) -> u32 {
        self.power
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::sin_theta_distance;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rank_one_constant_diagonal() {
        let u = nalgebra::DVector::from_element(4, 0.5);
        let sigma = &u * u.transpose();
        let out = hpca(&sigma, 1, &HpcaConfig::default()).unwrap();
        let got = out.basis.column(0);
        let dist = (got - &u).amax().min((got + &u).amax());
        assert!(dist < 1e-6, "dist {dist}");
    }

    #[test]
    fn subspace_iteration_matches_dense() {
        let n = 80;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x = Matrix::from_fn(n, 3, |_, _| rng.random::<f64>());
        let noise = Matrix::from_fn(n, n, |_, _| 0.05 * (rng.random::<f64>() - 0.5));
        let a = &x * x.transpose() + &noise + noise.transpose();
        let (dv, dvec) = dense_top_eigen(&a, 3, 9, &mut None);
        let mut warm = None;
        top_eigen(&a, 3, &mut warm);
        assert!(warm.is_some());
        let perturbed = &a + Matrix::identity(n, n) * 1e-3;
        top_eigen(&perturbed, 3, &mut warm);
        let (sv, svec) = top_eigen(&a, 3, &mut warm);
        for c in 0..3 {
            assert!((dv[c] - sv[c]).abs() < 1e-9 * dv[0].abs());
            assert!((dvec.column(c) - svec.column(c)).amax() < 1e-8);
        }
        let (_, again) = top_eigen(&a, 3, &mut warm);
        assert!((again - svec).amax() < 1e-8);
    }

    #[test]
    fn rank_errors() {
        let m = Matrix::identity(3, 3);
        assert!(matches!(hpca(&m, 4, &HpcaConfig::default()), Err(Error::Usage(_))));
        assert!(matches!(hpca(&m, 0, &HpcaConfig::default()), Err(Error::Usage(_))));
        let asym = Matrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        assert!(matches!(hpca(&asym, 1, &HpcaConfig::default()), Err(Error::Usage(_))));
    }

    #[test]
    fn zero_diagonal_fixed_point() {
        // Rank-2 symmetric matrix whose diagonal is already zero.
        let sigma = Matrix::from_row_slice(
            4,
            4,
            &[0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 2.0, 0.0],
        );
        let out = hpca(&sigma, 4, &HpcaConfig::default()).unwrap();
        assert_eq!(out.iterations, 1);
        let top = hpca(&sigma, 2, &HpcaConfig::default()).unwrap();
        // Eigenvalues are +-1 and +-2; the positive pair spans the block sums.
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let expected = Matrix::from_row_slice(4, 2, &[h, 0.0, h, 0.0, 0.0, h, 0.0, h]);
        assert!(sin_theta_distance(&top.basis, &expected).unwrap() < 1e-8);
    }

    #[test]
    fn weak_direction_under_large_diagonal() {
        // Two-level leading direction, a weak community contrast, and a
        // heterogeneous diagonal far larger than the weak eigenvalue.
        let n = 60;
        let a = nalgebra::DVector::from_fn(n, |i, _| if i < n / 2 { 1.15 } else { 0.85 }).normalize();
        let b = nalgebra::DVector::from_fn(n, |i, _| if i < n / 2 { 1.0 } else { -1.0 }).normalize();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut sigma = &a * a.transpose() * 5000.0 + &b * b.transpose() * 5.0;
        for i in 0..n {
            sigma[(i, i)] += 50.0 + 50.0 * rng.random::<f64>();
        }
        let out = hpca(&sigma, 2, &HpcaConfig::default()).unwrap();
        let mut truth = Matrix::zeros(n, 2);
        truth.set_column(0, &a);
        truth.set_column(1, &b);
        let truth = truth.qr().q();
        assert!(sin_theta_distance(&out.basis, &truth).unwrap() < 1e-2);
    }

    #[test]
    fn one_dimensional_layer_mode() {
        let t = Tensor3::filled([3, 3, 1], 0.2);
        let s = estimate_subspaces(&t, &t, &RefineConfig::new(1, 1, 1)).unwrap();
        assert_eq!(s.u_w.shape(), (1, 1));
        assert!((s.u_w[(0, 0)].abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn identical_inputs_share_layer_subspace() {
        let t = Tensor3::from_fn([4, 4, 3], |i, j, l| 0.1 + 0.01 * ((i + j) % 3) as f64 + 0.05 * l as f64);
        let s = estimate_subspaces(&t, &t, &RefineConfig::new(2, 2, 2)).unwrap();
        assert!(sin_theta_distance(&s.u_w, &s.u_m).unwrap() < 1e-12);
    }

    #[test]
    fn refresh_counts() {
        let mut sched = PowerOfTwoSchedule::default();
        let fired: Vec<usize> = (1..=40).filter(|&t| sched.tick(t)).collect();
        assert_eq!(fired, vec![1, 2, 4, 8, 16, 32]);
        assert!(!refresh_schedule(3, 2));
        for t in 1..2000usize {
            let mut s = PowerOfTwoSchedule::default();
            let count = (1..=t).filter(|&x| s.tick(x)).count();
            assert_eq!(count, t.ilog2() as usize + 1);
        }
    }

    #[test]
    fn projection_is_idempotent_and_contracting() {
        let t = Tensor3::from_fn([6, 6, 2], |i, j, l| ((i * 3 + j * 5 + l * 7) % 11) as f64 / 11.0);
        let sym = Tensor3::from_fn([6, 6, 2], |i, j, l| t.get(i, j, l) + t.get(j, i, l));
        let s = estimate_subspaces(&sym, &sym, &RefineConfig::new(2, 1, 1)).unwrap();
        let (once, _) = project_lowrank(&sym, &sym, &s).unwrap();
        let (twice, _) = project_lowrank(&once, &once, &s).unwrap();
        assert!((&once - &twice).max_abs() <= 1e-12);
        assert!(once.frobenius_norm() <= sym.frobenius_norm() + 1e-12);
    }
}
