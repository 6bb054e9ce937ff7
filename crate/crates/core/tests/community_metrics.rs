mod common;

use armsbm::community::{adjusted_rand_index, extract_membership, hamming_loss, kmeans_membership};
use armsbm::Matrix;
use common::{brute_hamming, gaussian, membership, pair_count_ari, rng};
use proptest::prelude::*;

fn labels(k: usize, n: usize) -> impl Strategy<Value = Vec<usize>> {
    proptest::collection::vec(0..k, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn hamming_matches_enumeration(k in 1usize..5, (a, b) in (2usize..30).prop_flat_map(|n| (labels(4, n), labels(4, n)))) {
        let a: Vec<usize> = a.into_iter().map(|x| x % k).collect();
        let b: Vec<usize> = b.into_iter().map(|x| x % k).collect();
        let got = hamming_loss(&membership(&a, k), &membership(&b, k)).unwrap();
        prop_assert!((got - brute_hamming(&a, &b, k)).abs() <= 1e-15);
    }

    #[test]
    fn ari_matches_pair_counting(ka in 2usize..5, kb in 2usize..5, (a, b) in (3usize..40).prop_flat_map(|n| (labels(4, n), labels(4, n)))) {
        let a: Vec<usize> = a.into_iter().map(|x| x % ka).collect();
        let b: Vec<usize> = b.into_iter().map(|x| x % kb).collect();
        let got = adjusted_rand_index(&membership(&a, ka), &membership(&b, kb)).unwrap();
        let oracle = pair_count_ari(&a, &b);
        if oracle.is_finite() {
            prop_assert!((got - oracle).abs() <= 1e-12, "{got} vs {oracle}");
        }
    }

    #[test]
    fn ari_is_invariant_to_relabeling(seed in any::<u64>(), n in 4usize..40) {
        use rand::seq::SliceRandom;
        let mut r = rng(seed);
        let a: Vec<usize> = (0..n).map(|i| (i * 7 + seed as usize) % 3).collect();
        let mut perm = vec![0usize, 1, 2];
        perm.shuffle(&mut r);
        let b: Vec<usize> = a.iter().map(|&x| perm[x]).collect();
        let ari = adjusted_rand_index(&membership(&a, 3), &membership(&b, 3)).unwrap();
        prop_assert!((ari - 1.0).abs() <= 1e-12 || !a.iter().any(|&x| x != a[0]));
        prop_assert_eq!(hamming_loss(&membership(&b, 3), &membership(&a, 3)).unwrap(), 0.0);
    }
}

#[test]
fn ari_hand_values() {
    let ari = |a: &[usize], b: &[usize]| adjusted_rand_index(&membership(a, 2), &membership(b, 2)).unwrap();
    assert!((ari(&[0, 0, 1, 1], &[0, 1, 0, 1]) + 0.5).abs() < 1e-15);
    assert_eq!(ari(&[0, 0, 1, 1], &[1, 1, 0, 0]), 1.0);
}

#[test]
fn kmeans_separates_well_spread_clusters() {
    let mut r = rng(5);
    let truth: Vec<usize> = (0..60).map(|i| i % 3).collect();
    let centers = [[0.0, 0.0], [5.0, 0.0], [0.0, 5.0]];
    let pts = Matrix::from_fn(60, 2, |i, d| centers[truth[i]][d] + 0.3 * gaussian(&mut r));
    let fit = kmeans_membership(&pts, 3, 20, 1).unwrap();
    let z = extract_membership(&fit);
    assert_eq!(hamming_loss(&z, &membership(&truth, 3)).unwrap(), 0.0);
    assert_eq!(kmeans_membership(&pts, 3, 20, 1).unwrap(), fit);
}
