use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use snsrom::bench::{relative_error, trajectory_matrix};
use snsrom::compression::SpaceTimeBasis;
use snsrom::fom::{burgers_model, diffusion_model, ParameterPoint, SemiDiscreteModel};
use snsrom::integrators::{solve_fom, IntegrationOptions, NewtonTolerances, Scheme, SchemeId};
use snsrom::rom::GaussNewtonTolerances;
use snsrom::strom::{
    lift_space_time, st_gnat_sns_solve, st_lspg_solve, st_projector, st_sampling, st_sns_residual_basis,
    SpaceTimeOperator, StSnsVariant,
};

fn full_basis(ns: usize, nt: usize) -> SpaceTimeBasis {
    SpaceTimeBasis {
        spatial: DMatrix::identity(ns, ns),
        temporal: DMatrix::identity(nt, nt),
        pairs: (0..ns).flat_map(|i| (0..nt).map(move |j| (i, j))).collect(),
        spatial_sv: vec![1.0; ns],
        temporal_sv: vec![1.0; nt],
    }
}

fn random_factor(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
    let m = DMatrix::from_fn(rows, cols, |i, j| (((i * 13 + j * 7) as u64 * 2654435761 + seed) % 101) as f64 - 50.0);
    m.qr().q()
}

fn tight() -> GaussNewtonTolerances {
    GaussNewtonTolerances { step_relative: 1e-13, reduction: 1e-14, stationarity: 1e-14, max_iterations: 40 }
}

#[test]
fn operator_matches_the_dense_block_matrix() {
    let model = diffusion_model(3).unwrap();
    let ns = model.n_space();
    let nt = 4;
    let m = model.mass().to_dense();
    let mut dense = DMatrix::zeros(ns * nt, ns * nt);
    for n in 0..nt {
        dense.view_mut((n * ns, n * ns), (ns, ns)).copy_from(&m);
        if n > 0 {
            dense.view_mut((n * ns, (n - 1) * ns), (ns, ns)).copy_from(&(-&m));
        }
    }
    let op = SpaceTimeOperator::new(model.mass().clone(), nt);
    let x = DVector::from_fn(ns * nt, |i, _| (i as f64 * 0.3).sin());
    assert!((op.apply(&x) - &dense * &x).amax() < 1e-14);
    let basis = SpaceTimeBasis {
        spatial: random_factor(ns, 3, 1),
        temporal: random_factor(nt, 2, 2),
        pairs: vec![(0, 0), (1, 0), (0, 1), (2, 1)],
        spatial_sv: vec![3.0, 2.0, 1.0],
        temporal_sv: vec![2.0, 1.0],
    };
    let applied = op.apply_basis(&basis).materialize();
    assert!((applied - &dense * basis.materialize()).amax() < 1e-13);
}

#[test]
fn full_space_time_basis_reproduces_backward_euler() {
    let model = burgers_model(12).unwrap();
    let mu = ParameterPoint::new(vec![1.3, 0.021]);
    let nt = 5;
    let dt = 0.02;
    let options = IntegrationOptions {
        tolerances: NewtonTolerances { relative: 1e-13, absolute: 1e-14, step_relative: 1e-15, max_iterations: 40 },
        ..Default::default()
    };
    let reference = trajectory_matrix(
        &solve_fom(&model, &mu, &SchemeId::new(Scheme::BackwardEuler, dt, nt), &options).unwrap().states,
    );
    let basis = full_basis(12, nt);
    let sol = st_lspg_solve(&model, &basis, &mu, dt, &tight()).unwrap();
    let u0 = model.initial_state(&mu).unwrap();
    let err = relative_error(&lift_space_time(&basis, &sol.x, &u0), &reference).unwrap();
    assert!(err < 1e-10, "{err}");
}

#[test]
fn sns_residual_basis_on_every_row_matches_lspg_on_the_full_basis() {
    let model = burgers_model(8).unwrap();
    let mu = ParameterPoint::new(vec![1.25, 0.023]);
    let nt = 3;
    let dt = 0.02;
    let basis = full_basis(8, nt);
    let residual = st_sns_residual_basis(&basis, 24, 24, StSnsVariant::Operator, model.mass()).unwrap();
    let projector = st_projector(&residual, 24, 1).unwrap();
    let sns = st_gnat_sns_solve(&model, &basis, &projector, &mu, dt, &tight()).unwrap();
    let lspg = st_lspg_solve(&model, &basis, &mu, dt, &tight()).unwrap();
    assert!((sns.x - lspg.x).amax() < 1e-9);
    assert_eq!(sns.counters.full_velocity, 0);
}

#[test]
fn identity_mass_admits_the_solution_basis_as_residual_basis() {
    let burgers = burgers_model(6).unwrap();
    let diffusion = diffusion_model(2).unwrap();
    let b = full_basis(6, 2);
    assert!(st_sns_residual_basis(&b, 4, 6, StSnsVariant::Basis, burgers.mass()).is_ok());
    let d = full_basis(9, 2);
    assert!(st_sns_residual_basis(&d, 4, 6, StSnsVariant::Basis, diffusion.mass()).is_err());
    assert!(st_sns_residual_basis(&d, 4, 3, StSnsVariant::Operator, diffusion.mass()).is_err());
    assert_eq!(StSnsVariant::Operator.for_width(4, 6), StSnsVariant::OperatorExtended);
    assert_eq!(StSnsVariant::OperatorExtended.for_width(4, 4), StSnsVariant::Operator);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn space_time_plans_are_distinct_and_cover_every_block(
        ns in 4usize..12,
        nt in 2usize..8,
        width in 1usize..5,
        extra in 0usize..10,
        blocks in 1usize..4,
        seed in 0u64..1000,
    ) {
        let s_modes = width.min(ns);
        let basis = SpaceTimeBasis {
            spatial: random_factor(ns, s_modes, seed),
            temporal: random_factor(nt, 2.min(nt), seed + 7),
            pairs: (0..s_modes).flat_map(|i| (0..2.min(nt)).map(move |j| (i, j))).take(width).collect(),
            spatial_sv: vec![1.0; s_modes],
            temporal_sv: vec![1.0; 2.min(nt)],
        };
        let width = basis.width();
        let n_z = (width + extra).min(ns * nt);
        let plan = st_sampling(&basis, n_z, blocks).unwrap();
        prop_assert_eq!(plan.n_z(), n_z);
        let mut sorted = plan.indices.clone();
        sorted.sort_unstable();
        sorted.dedup();
        prop_assert_eq!(sorted.len(), n_z);
        prop_assert!(plan.indices.iter().all(|&r| r < ns * nt));
        let blocks = blocks.min(nt);
        if n_z >= blocks {
            for b in 0..blocks {
                let (start, end) = (b * nt / blocks * ns, (b + 1) * nt / blocks * ns);
                prop_assert!(plan.indices.iter().any(|&r| (start..end).contains(&r)), "block {} empty", b);
            }
        }
    }
}
