use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use snsrom::linalg::{cond2, gram, left_singular, lstsq, numerical_rank, pinv, thin_svd, BandMatrix};
use snsrom::par::Execution;

fn lcg_matrix(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
    let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    DMatrix::from_fn(rows, cols, |_, _| {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
    })
}

fn banded(n: usize, lower: usize, upper: usize, seed: u64) -> DMatrix<f64> {
    let mut m = lcg_matrix(n, n, seed);
    for i in 0..n {
        for j in 0..n {
            if (j + lower < i) || (i + upper < j) {
                m[(i, j)] = 0.0;
            }
        }
        m[(i, i)] += 0.1;
    }
    m
}

#[test]
fn left_singular_covers_tall_and_wide_inputs() {
    for (rows, cols) in [(30, 8), (8, 30), (12, 12)] {
        let a = lcg_matrix(rows, cols, 7);
        let svd = left_singular(&a, Execution::Sequential);
        let mut reference: Vec<f64> = a.singular_values().iter().copied().collect();
        reference.sort_by(|x, y| y.total_cmp(x));
        for (k, r) in reference.iter().enumerate() {
            assert!((svd.sigma[k] - r).abs() < 1e-10, "{rows}x{cols} sigma {k}");
        }
        let r = svd.rank();
        let u = svd.u.columns(0, r);
        let ortho = u.transpose() * u;
        assert!((ortho - DMatrix::identity(r, r)).amax() < 1e-10);
        let residual = &a - u * (u.transpose() * &a);
        assert!(residual.amax() < 1e-10, "{rows}x{cols} reconstruction");
    }
}

#[test]
fn rank_and_condition_of_a_deficient_matrix() {
    let left = lcg_matrix(20, 3, 1);
    let right = lcg_matrix(3, 10, 2);
    let a = &left * &right;
    assert_eq!(numerical_rank(&a), 3);
    assert_eq!(left_singular(&a, Execution::Sequential).rank(), 3);
    assert!(cond2(&a).is_infinite() || cond2(&a) > 1e10);
    assert!(lstsq(&a, &DVector::zeros(20)).is_err());
    let p = pinv(&a);
    assert!((&a * &p * &a - &a).amax() < 1e-10);
}

#[test]
fn lstsq_matches_normal_equations() {
    let a = lcg_matrix(15, 4, 3);
    let b = DVector::from_fn(15, |i, _| i as f64 * 0.1 - 0.3);
    let x = lstsq(&a, &b).unwrap();
    let normal = (a.transpose() * &a).lu().solve(&(a.transpose() * &b)).unwrap();
    assert!((x - normal).amax() < 1e-10);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn band_lu_solves_like_dense_lu(n in 3usize..25, lower in 0usize..4, upper in 0usize..4, seed in 0u64..10_000) {
        let dense = banded(n, lower, upper, seed);
        let band = BandMatrix::from_dense(&dense, lower, upper);
        prop_assert_eq!(band.to_dense(), dense.clone());
        let b = DVector::from_fn(n, |i, _| 1.0 + i as f64);
        prop_assert!((band.mul_vec(&b) - &dense * &b).amax() < 1e-12);
        if let (Ok(lu), Some(expected)) = (band.lu(), dense.clone().lu().solve(&b)) {
            let x = lu.solve(&b);
            let scale = expected.amax().max(1.0);
            prop_assume!(scale < 1e6);
            prop_assert!((x - expected).amax() < 1e-8 * scale);
        }
    }

    #[test]
    fn gram_is_the_transpose_product(rows in 1usize..20, cols in 1usize..20, seed in 0u64..10_000) {
        let a = lcg_matrix(rows, cols, seed);
        let expected = &a * a.transpose();
        let seq = gram(&a, Execution::Sequential);
        let par = gram(&a, Execution::Parallel);
        prop_assert!((&seq - &expected).amax() < 1e-12);
        prop_assert_eq!(seq, par);
    }

    #[test]
    fn thin_svd_reconstructs_rank_deficient_products(
        rows in 2usize..60,
        cols in 2usize..60,
        rank in 1usize..8,
        seed in 0u64..10_000,
    ) {
        let a = lcg_matrix(rows, rank, seed) * lcg_matrix(rank, cols, seed + 1);
        let (u, sigma, vt) = thin_svd(&a);
        prop_assert!(sigma.windows(2).all(|w| w[0] >= w[1]));
        let mut us = u.clone();
        for (k, &s) in sigma.iter().enumerate() {
            us.column_mut(k).scale_mut(s);
        }
        prop_assert!((us * vt - &a).amax() < 1e-12 * a.amax().max(1.0));
        let k = sigma.len();
        prop_assert!((u.tr_mul(&u) - DMatrix::identity(k, k)).amax() < 1e-10);
        prop_assert_eq!(left_singular(&a, Execution::Sequential).rank(), rank.min(rows).min(cols));
    }
}
