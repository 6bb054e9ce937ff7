//! Heteroskedastic PCA against plain eigenvectors on a noisy Gram matrix, and
//! the Tucker projection of raw estimates.

use armsbm::model::{make_scenario, ScenarioId, ScenarioSize};
use armsbm::spectral::{estimate_subspaces, hpca, project_lowrank, HpcaConfig, RefineConfig};
use armsbm::stats::SuffStats;
use armsbm::tensor::{sin_theta_distance, svd};
use armsbm::Matrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> armsbm::Result<()> {
    // Planted rank-2 subspace plus sample-covariance noise whose variance is
    // large on the first ten rows. That noise lands mostly on the diagonal.
    let (n, r, m) = (60, 2, 400);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let u = svd(&Matrix::from_fn(n, r, |_, _| rng.random::<f64>() - 0.5))?.u;
    let signal = &u * Matrix::from_diagonal(&nalgebra::DVector::from_vec(vec![3.0, 2.0])) * u.transpose();
    let noise = Matrix::from_fn(n, m, |i, _| {
        let sd = if i < 10 { 2.0 } else { 0.1 };
        sd * (rng.random::<f64>() - 0.5) * 12f64.sqrt()
    });
    let sigma = &signal + &noise * noise.transpose() / m as f64;

    let plain = svd(&sigma)?.u.columns(0, r).into_owned();
    let h = hpca(&sigma, r, &HpcaConfig::default())?;
    println!("sin-theta to planted subspace: plain {:.4}, H-PCA {:.4} ({} iterations)",
        sin_theta_distance(&plain, &u)?, sin_theta_distance(&h.basis, &u)?, h.iterations);

    // Full-history estimates on a stationary scenario, before and after projection.
    let sc = make_scenario(ScenarioId::Stationary(1), ScenarioSize { n: Some(80), t_max: Some(200) })?;
    let snaps = sc.simulate(2)?;
    let mut stats = SuffStats::zeros(80, 2);
    for t in 1..snaps.len() {
        stats.update(&snaps[t - 1], &snaps[t])?;
    }
    let mle = stats.full_window().mle();
    let cfg = RefineConfig::new(2, 2, 2);
    let s = estimate_subspaces(&mle.theta, &mle.delta, &cfg)?;
    let (theta_t, _) = project_lowrank(&mle.theta, &mle.delta, &s)?;
    let (theta, _) = sc.truth_at(200)?;
    println!("Theta error (Frobenius): raw {:.3}, projected {:.3}",
        (&mle.theta - &theta).frobenius_norm(), (&theta_t - &theta).frobenius_norm());
    Ok(())
}
