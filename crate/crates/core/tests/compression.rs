use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;

use snsrom::compression::{
    fix_signs, nonlinear_snapshots, run_training, solution_snapshots, st_hosvd, Pod, SnapshotKind,
};
use snsrom::fom::{burgers_model, ParameterPoint};
use snsrom::integrators::{IntegrationOptions, Scheme, SchemeId};
use snsrom::par::Execution;

fn product(rows: usize, cols: usize, rank: usize, seed: u64) -> DMatrix<f64> {
    let mut state = seed.wrapping_add(0x2545F4914F6CDD1D);
    let mut next = move || {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    };
    let left = DMatrix::from_fn(rows, rank, |_, _| next());
    let right = DMatrix::from_fn(rank, cols, |_, _| next());
    left * right
}

/// Singular values from the eigenvalues of the smaller Gram matrix.
fn sigma_oracle(a: &DMatrix<f64>) -> Vec<f64> {
    let g = if a.nrows() <= a.ncols() { a * a.transpose() } else { a.transpose() * a };
    let mut s: Vec<f64> = SymmetricEigen::new(g).eigenvalues.iter().map(|v| v.max(0.0).sqrt()).collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

fn training() -> Vec<ParameterPoint> {
    vec![ParameterPoint::new(vec![1.2, 0.02]), ParameterPoint::new(vec![1.5, 0.025])]
}

#[test]
fn solution_snapshots_are_centered_per_run() {
    let model = burgers_model(30).unwrap();
    let scheme = SchemeId::over(Scheme::MidpointRk2, 0.1, 10);
    let options = IntegrationOptions { record_velocities: true, ..Default::default() };
    let runs = run_training(&model, &scheme, &training(), &options, Execution::Sequential).unwrap();
    let snaps = solution_snapshots(&runs, &training(), Scheme::MidpointRk2);
    assert_eq!(snaps.kind, SnapshotKind::Solution);
    // States plus the ten midpoints of each run.
    assert_eq!(snaps.n_cols(), 2 * (11 + 10));
    let centered = snaps.centered();
    for (c, p) in snaps.provenance.iter().enumerate() {
        if p.step == 0 && !p.half {
            assert_eq!(centered.column(c).amax(), 0.0);
        }
    }
    let nl = nonlinear_snapshots(&runs, &training());
    assert_eq!(nl.kind, SnapshotKind::NonlinearTerm);
    assert_eq!(nl.n_cols(), runs.iter().map(|r| r.velocities.len()).sum::<usize>());
}

#[test]
fn training_is_identical_in_both_execution_modes() {
    let model = burgers_model(30).unwrap();
    let scheme = SchemeId::over(Scheme::BackwardEuler, 0.1, 10);
    let opts = IntegrationOptions::default();
    let seq = run_training(&model, &scheme, &training(), &opts, Execution::Sequential).unwrap();
    let par = run_training(&model, &scheme, &training(), &opts, Execution::Parallel).unwrap();
    for (a, b) in seq.iter().zip(&par) {
        assert_eq!(a.states, b.states);
    }
}

#[test]
fn pod_rank_and_truncation() {
    let a = product(40, 25, 6, 4);
    let pod = Pod::from_matrix(&a, Execution::Sequential);
    assert_eq!(pod.rank(), 6);
    assert!(pod.basis(7).is_err());
    assert!(pod.basis(0).is_err());
    let leading = pod.leading(10).unwrap();
    assert_eq!(leading.width(), 10);
    let (phi, ext) = pod.extended(3, 5).unwrap();
    assert_eq!(phi.columns, ext.columns.columns(0, 3).into_owned());
    assert!(pod.extended(4, 4).is_err());
}

#[test]
fn hosvd_pairs_follow_singular_value_products() {
    let slices: Vec<DMatrix<f64>> = (0..3).map(|k| product(20, 12, 4, k)).collect();
    let basis = st_hosvd(&slices, 3, 3, 5, Execution::Sequential).unwrap();
    assert_eq!(basis.width(), 5);
    let weight = |&(a, b): &(usize, usize)| basis.spatial_sv[a] * basis.temporal_sv[b];
    assert!(basis.pairs.windows(2).all(|w| weight(&w[0]) >= weight(&w[1])));
    let m = basis.materialize();
    assert!((m.tr_mul(&m) - DMatrix::identity(5, 5)).amax() < 1e-10);
    assert_eq!(m.column(2).into_owned(), basis.column(2));
    assert!(st_hosvd(&slices, 3, 3, 10, Execution::Sequential).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn pod_spectrum_and_basis_match_the_gram_oracle(
        rows in 3usize..40,
        cols in 3usize..40,
        rank in 1usize..5,
        seed in 0u64..5000,
    ) {
        let a = product(rows, cols, rank, seed);
        let pod = Pod::from_matrix(&a, Execution::Sequential);
        let oracle = sigma_oracle(&a);
        let top = oracle[0];
        for k in 0..rank.min(rows).min(cols) {
            prop_assert!((pod.singular_values()[k] - oracle[k]).abs() < 1e-9 * top);
        }
        let basis = pod.basis(pod.rank()).unwrap();
        let q = &basis.columns;
        prop_assert!((q.tr_mul(q) - DMatrix::identity(q.ncols(), q.ncols())).amax() < 1e-10);
        prop_assert!((&a - q * q.tr_mul(&a)).amax() < 1e-10 * a.amax().max(1.0));
    }

    #[test]
    fn fixed_signs_make_the_largest_entry_positive(seed in 0u64..5000) {
        let mut m = product(8, 4, 4, seed);
        fix_signs(&mut m);
        for col in m.column_iter() {
            let big = col.iter().fold(0.0_f64, |b, v| if v.abs() > b.abs() { *v } else { b });
            prop_assert!(big >= 0.0);
        }
    }
}
