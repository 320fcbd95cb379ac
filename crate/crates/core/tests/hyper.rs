use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use snsrom::compression::Basis;
use snsrom::hyper::{
    build_projector, deim_sampling, gnat_sampling, orthogonalized_projector, projection_error_bound,
    qr_pivot_sampling, sample, sns_basis, SamplingMethod,
};
use snsrom::linalg::{BandMatrix, MassOperator};

fn random_matrix(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
    let mut state = seed.wrapping_mul(0x9E3779B97F4A7C15).wrapping_add(17);
    DMatrix::from_fn(rows, cols, |_, _| {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    })
}

fn orthonormal(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
    random_matrix(rows, cols, seed).qr().q()
}

/// Textbook DEIM: each pick maximizes the interpolation residual of the next column.
fn deim_oracle(u: &DMatrix<f64>) -> Vec<usize> {
    let argmax = |v: &DVector<f64>| v.iamax();
    let mut picks = vec![argmax(&u.column(0).into_owned())];
    for j in 1..u.ncols() {
        let lead = u.columns(0, j).into_owned();
        let pu = DMatrix::from_fn(j, j, |r, c| lead[(picks[r], c)]);
        let rhs = DVector::from_fn(j, |r, _| u[(picks[r], j)]);
        let c = pu.lu().solve(&rhs).unwrap();
        let residual = u.column(j) - lead * c;
        picks.push(argmax(&residual));
    }
    picks
}

#[test]
fn deim_matches_the_textbook_greedy() {
    for seed in 0..20 {
        let u = orthonormal(40, 6, seed);
        assert_eq!(deim_sampling(&u).unwrap().indices, deim_oracle(&u), "seed {seed}");
    }
}

#[test]
fn qr_pivot_starts_at_the_largest_row() {
    let u = orthonormal(30, 5, 3);
    let plan = qr_pivot_sampling(&u, 9).unwrap();
    let norms: Vec<f64> = (0..30).map(|i| u.row(i).norm()).collect();
    let top = (0..30).max_by(|&a, &b| norms[a].total_cmp(&norms[b])).unwrap();
    assert_eq!(plan.indices[0], top);
    assert_eq!(plan.n_z(), 9);
}

#[test]
fn sampling_rejects_bad_counts() {
    let u = orthonormal(10, 4, 1);
    assert!(gnat_sampling(&u, 3).is_err());
    assert!(gnat_sampling(&u, 11).is_err());
    assert!(sample(&u, SamplingMethod::DeimGreedy, 5).is_err());
    assert!(qr_pivot_sampling(&u, 0).is_err());
}

#[test]
fn deim_projector_interpolates_at_the_samples() {
    let u = orthonormal(25, 5, 9);
    let basis = Basis::new(u, true);
    let plan = deim_sampling(&basis.columns).unwrap();
    let p = build_projector(&basis, &plan, false, None).unwrap();
    let v = DVector::from_fn(25, |i, _| (i as f64 * 0.37).cos());
    let pv = p.apply(&v);
    for &i in &plan.indices {
        assert!((pv[i] - v[i]).abs() < 1e-12);
    }
}

#[test]
fn weighted_projector_preserves_the_weighted_range() {
    let n = 20;
    let m = DMatrix::from_fn(n, n, |i, j| match i as isize - j as isize {
        0 => 4.0 / 6.0,
        1 | -1 => 1.0 / 6.0,
        _ => 0.0,
    });
    let mass = MassOperator::banded(BandMatrix::from_dense(&m, 1, 1)).unwrap();
    let phi = Basis::new(orthonormal(n, 4, 5), true);
    let sns = sns_basis(&phi, &mass);
    assert!((&sns.columns - &m * &phi.columns).amax() < 1e-14);
    assert!(!sns.orthonormal);
    let p = orthogonalized_projector(&phi, SamplingMethod::GnatGreedy, 8, Some(&mass)).unwrap();
    let v = &m * (&phi.columns * DVector::from_vec(vec![1.0, -2.0, 0.5, 3.0]));
    assert!((p.apply(&v) - &v).amax() < 1e-10);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn plans_hold_distinct_rows_in_range(
        rows in 12usize..60,
        width in 1usize..6,
        extra in 0usize..6,
        method in 0usize..3,
        seed in 0u64..5000,
    ) {
        let u = orthonormal(rows, width, seed);
        let method = [SamplingMethod::DeimGreedy, SamplingMethod::GnatGreedy, SamplingMethod::QrPivot][method];
        let n_z = if method == SamplingMethod::DeimGreedy { width } else { width + extra };
        let plan = sample(&u, method, n_z).unwrap();
        prop_assert_eq!(plan.n_z(), n_z);
        let mut sorted = plan.indices.clone();
        sorted.sort_unstable();
        sorted.dedup();
        prop_assert_eq!(sorted.len(), n_z);
        prop_assert!(plan.indices.iter().all(|&i| i < rows));
    }

    #[test]
    fn projectors_are_idempotent_and_exact_on_their_range(
        rows in 10usize..40,
        width in 1usize..6,
        extra in 0usize..5,
        seed in 0u64..5000,
    ) {
        let basis = Basis::new(random_matrix(rows, width, seed), false);
        let p = orthogonalized_projector(&basis, SamplingMethod::GnatGreedy, width + extra, None).unwrap();
        let dense = p.to_dense();
        prop_assert!((&dense * &dense - &dense).amax() < 1e-8 * dense.amax().max(1.0));
        let inside = &basis.columns * DVector::from_fn(width, |i, _| 1.0 + i as f64);
        prop_assert!((p.apply(&inside) - &inside).amax() < 1e-9 * inside.amax());
        let v = DVector::from_fn(rows, |i, _| ((i as u64 + seed) % 7) as f64 - 3.0);
        let report = projection_error_bound(&p, &v);
        prop_assert!(report.lhs <= report.rhs * (1.0 + 1e-8) + 1e-12);
    }
}
