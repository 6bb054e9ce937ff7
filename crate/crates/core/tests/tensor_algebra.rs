mod common;

use armsbm::tensor::{projector, sin_theta_distance, singular_values, svd};
use armsbm::{Matrix, Tensor3};
use common::{gaussian, jacobi_singular_values, random_basis, rng};
use proptest::prelude::*;

fn random_tensor(seed: u64, dims: [usize; 3]) -> Tensor3 {
    let mut r = rng(seed);
    Tensor3::from_fn(dims, |_, _, _| gaussian(&mut r))
}

fn random_matrix(seed: u64, rows: usize, cols: usize) -> Matrix {
    let mut r = rng(seed);
    Matrix::from_fn(rows, cols, |_, _| gaussian(&mut r))
}

fn close(a: &Tensor3, b: &Tensor3) -> f64 {
    (a - b).max_abs()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fold_inverts_matricize(seed in any::<u64>(), p1 in 1usize..6, p2 in 1usize..6, p3 in 1usize..6, mode in 1usize..4) {
        let t = random_tensor(seed, [p1, p2, p3]);
        let m = t.matricize(mode).unwrap();
        prop_assert_eq!(Tensor3::fold(&m, mode, [p1, p2, p3]).unwrap(), t);
    }

    #[test]
    fn mode_product_is_unfolded_product(seed in any::<u64>(), p1 in 1usize..6, p2 in 1usize..6, p3 in 1usize..6, q in 1usize..5, mode in 1usize..4) {
        let t = random_tensor(seed, [p1, p2, p3]);
        let u = random_matrix(seed ^ 1, q, [p1, p2, p3][mode - 1]);
        let lhs = t.mode_product(&u, mode).unwrap().matricize(mode).unwrap();
        let rhs = &u * t.matricize(mode).unwrap();
        prop_assert!((lhs - rhs).amax() <= 1e-10);
    }

    #[test]
    fn products_along_different_modes_commute(seed in any::<u64>(), p in 2usize..5, q in 1usize..4) {
        let t = random_tensor(seed, [p, p + 1, p + 2]);
        let u = random_matrix(seed ^ 2, q, p);
        let v = random_matrix(seed ^ 3, q, p + 2);
        let a = t.mode_product(&u, 1).unwrap().mode_product(&v, 3).unwrap();
        let b = t.mode_product(&v, 3).unwrap().mode_product(&u, 1).unwrap();
        prop_assert!(close(&a, &b) <= 1e-10);
    }

    #[test]
    fn frobenius_agrees_across_unfoldings(seed in any::<u64>(), p1 in 1usize..6, p2 in 1usize..6, p3 in 1usize..6) {
        let t = random_tensor(seed, [p1, p2, p3]);
        let f = t.frobenius_norm();
        for mode in 1..=3 {
            let m = t.matricize(mode).unwrap();
            let from_sv = jacobi_singular_values(&m).iter().map(|s| s * s).sum::<f64>().sqrt();
            prop_assert!((f - m.norm()).abs() <= 1e-10);
            prop_assert!((f - from_sv).abs() <= 1e-10 * (1.0 + f));
        }
    }

    #[test]
    fn gram_is_unfolding_times_transpose(seed in any::<u64>(), p in 2usize..6) {
        let t = random_tensor(seed, [p, p, 3]);
        for mode in 1..=3 {
            let m = t.matricize(mode).unwrap();
            prop_assert!((t.gram(mode).unwrap() - &m * m.transpose()).amax() <= 1e-10);
        }
    }

    #[test]
    fn svd_matches_jacobi_and_reconstructs(seed in any::<u64>(), rows in 1usize..8, cols in 1usize..8) {
        let a = random_matrix(seed, rows, cols);
        let dec = svd(&a).unwrap();
        let oracle = jacobi_singular_values(&a);
        for (s, o) in dec.s.iter().zip(&oracle) {
            prop_assert!((s - o).abs() <= 1e-9 * (1.0 + o));
        }
        prop_assert!((dec.reconstruct() - &a).amax() <= 1e-10);
        prop_assert_eq!(singular_values(&a).len(), rows.min(cols));
    }

    #[test]
    fn sin_theta_is_rotation_invariant(seed in any::<u64>(), n in 4usize..10, k in 1usize..4) {
        let mut r = rng(seed);
        let u = random_basis(&mut r, n, k);
        let o = random_basis(&mut r, k, k);
        prop_assert!(sin_theta_distance(&u, &(&u * o)).unwrap() <= 1e-7);
        let w = random_basis(&mut r, n, k);
        let d = sin_theta_distance(&u, &w).unwrap();
        prop_assert!((d - sin_theta_distance(&w, &u).unwrap()).abs() <= 1e-9);
        prop_assert!((0.0..=2f64.sqrt() + 1e-12).contains(&d));
        let p = projector(&u);
        prop_assert!((&p * &p - &p).amax() <= 1e-10);
    }
}
