//! Invariant suites on small problems: subspace inclusion, projector
//! properties and degenerate-case equivalences.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::compression::{solution_snapshots, Basis, Pod, SpaceTimeBasis};
use crate::fom::{burgers_model, ParameterPoint, SemiDiscreteModel};
use crate::hyper::{
    build_projector, orthogonalized_projector, projection_error_bound, sample, sns_basis, SamplingMethod,
    SamplingPlan,
};
use crate::integrators::{integrate, solve_fom, IntegrationOptions, NewtonTolerances, Scheme, SchemeId};
use crate::linalg::{thin_svd, MassOperator};
use crate::par::Execution;
use crate::rom::{self, GaussNewtonTolerances, RomMethod, SpatialRom};
use crate::strom::{SpaceTimeProblem, SpaceTimeProjector};

/// Outcome of one check.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub suite: &'static str,
    pub name: String,
    /// Measured quantity; NaN when the check could not run.
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
    pub detail: Option<String>,
}

impl Check {
    fn measured(suite: &'static str, name: String, value: f64, threshold: f64) -> Self {
        Check { suite, name, value, threshold, passed: value <= threshold, detail: None }
    }

    fn failed(suite: &'static str, name: String, threshold: f64, detail: impl ToString) -> Self {
        Check { suite, name, value: f64::NAN, threshold, passed: false, detail: Some(detail.to_string()) }
    }
}

const INCLUSION_CELLS: usize = 30;
const INCLUSION_STEPS: usize = 20;

fn small_burgers() -> (crate::fom::BurgersModel, ParameterPoint) {
    (burgers_model(INCLUSION_CELLS).expect("30 cells is valid"), ParameterPoint::new(vec![1.3, 0.021]))
}

fn tight_newton() -> NewtonTolerances {
    NewtonTolerances { relative: 1e-13, absolute: 1e-14, step_relative: 1e-14, max_iterations: 30 }
}

fn tight_gauss_newton() -> GaussNewtonTolerances {
    GaussNewtonTolerances { step_relative: 1e-13, reduction: 1e-14, stationarity: 1e-14, max_iterations: 30 }
}

/// Largest relative least-squares residual of the nonlinear-term snapshots
/// against `span{M u^k}` (midpoints included for Runge-Kutta).
pub fn subspace_inclusion(scheme: Scheme) -> Check {
    let name = format!("inclusion {}", scheme.name());
    let (model, mu) = small_burgers();
    let id = SchemeId::over(scheme, 0.2, INCLUSION_STEPS);
    let options = IntegrationOptions { record_velocities: true, tolerances: tight_newton(), ..Default::default() };
    let traj = match solve_fom(&model, &mu, &id, &options) {
        Ok(t) => t,
        Err(e) => return Check::failed("inclusion", name, 1e-8, e),
    };
    let mut states: Vec<&DVector<f64>> = traj.states.iter().collect();
    states.extend(traj.half_states.iter());
    let raw = DMatrix::from_fn(model.n_space(), states.len(), |r, c| states[c][r]);
    let span = model.mass().apply_mat(&raw);
    let (u, sigma, _) = thin_svd(&span);
    let rank = sigma.iter().take_while(|&&s| s > 1e-13 * sigma[0]).count();
    let range = u.columns(0, rank);
    let mut worst: f64 = 0.0;
    for v in &traj.velocities {
        let residual = (&v.value - range * range.tr_mul(&v.value)).norm();
        worst = worst.max(residual / v.value.norm().max(f64::MIN_POSITIVE));
    }
    Check::measured("inclusion", name, worst, 1e-8)
}

/// Idempotency, range exactness and the projection error bound on `cases`
/// random bases, sample plans and vectors.
pub fn projector_properties(cases: usize, seed: u64) -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idem: f64 = 0.0;
    let mut range: f64 = 0.0;
    let mut bound: f64 = f64::NEG_INFINITY;
    let mut built = 0;
    let mut attempts = 0;
    while built < cases && attempts < 20 * cases {
        attempts += 1;
        let n_rows = rng.gen_range(6..40);
        let width = rng.gen_range(1..=n_rows.min(6));
        let n_z = rng.gen_range(width..=n_rows);
        let phi = DMatrix::from_fn(n_rows, width, |_, _| rng.gen_range(-1.0..1.0));
        let method = match rng.gen_range(0..3) {
            0 if n_z == width => SamplingMethod::DeimGreedy,
            1 => SamplingMethod::QrPivot,
            _ => SamplingMethod::GnatGreedy,
        };
        let weight = if rng.gen_bool(0.25) {
            let d = DMatrix::from_diagonal(&DVector::from_fn(n_rows, |_, _| rng.gen_range(0.5..2.0)));
            Some(MassOperator::dense(d).expect("positive diagonal"))
        } else {
            None
        };
        let orthogonalize = rng.gen_bool(0.5);
        let basis = Basis::new(phi, false);
        let projector = sample(&basis.columns, method, n_z)
            .and_then(|plan| build_projector(&basis, &plan, orthogonalize, weight.as_ref()));
        let Ok(p) = projector else { continue };
        built += 1;
        let v = DVector::from_fn(n_rows, |_, _| rng.gen_range(-1.0..1.0));
        let pv = p.apply(&v);
        idem = idem.max((p.apply(&pv) - &pv).norm() / pv.norm().max(1.0));
        let c = DVector::from_fn(p.basis.width(), |_, _| rng.gen_range(-1.0..1.0));
        let mut inside = &p.basis.columns * c;
        if let Some(m) = &p.weight {
            inside = m.apply(&inside);
        }
        range = range.max((p.apply(&inside) - &inside).norm() / inside.norm().max(1.0));
        let report = projection_error_bound(&p, &v);
        bound = bound.max(report.lhs - report.rhs);
    }
    let mut out = vec![
        Check::measured("projector", "idempotency".into(), idem, 1e-10),
        Check::measured("projector", "range exactness".into(), range, 1e-10),
        Check::measured("projector", "error bound slack".into(), bound, 1e-10),
    ];
    if built < cases {
        out.push(Check::failed("projector", "case generation".into(), cases as f64, format!("only {built} valid cases")));
    }
    out
}

fn max_state_gap(lifted: &DMatrix<f64>, states: &[DVector<f64>]) -> f64 {
    let mut worst: f64 = 0.0;
    for (n, s) in states.iter().enumerate() {
        worst = worst.max((lifted.column(n) - s).norm() / s.norm().max(f64::MIN_POSITIVE));
    }
    worst
}

fn solve_tight(rom: SpatialRom<'_>, scheme: &SchemeId) -> Result<DMatrix<f64>, rom::RomError> {
    match rom {
        SpatialRom::Projected(sys) => {
            let options = IntegrationOptions { tolerances: tight_newton(), ..Default::default() };
            let traj = integrate(&sys, scheme, DVector::zeros(sys.left().nrows()), &options)?;
            Ok(crate::bench::trajectory_matrix(&traj.states))
        }
        SpatialRom::LeastSquares(mut rom) => {
            rom.tolerances = tight_gauss_newton();
            Ok(rom.solve(scheme, false)?.0.generalized)
        }
    }
}

/// Full basis and full sampling reproduce the full-order trajectory.
pub fn full_basis_equivalence(method: RomMethod, scheme: Scheme) -> Check {
    let name = format!("full basis {} {}", method.name(), scheme.name());
    let threshold = 1e-7;
    let (model, mu) = small_burgers();
    let id = SchemeId::over(scheme, 0.2, INCLUSION_STEPS);
    let options = IntegrationOptions { tolerances: tight_newton(), ..Default::default() };
    let fom = match solve_fom(&model, &mu, &id, &options) {
        Ok(t) => t,
        Err(e) => return Check::failed("degeneracy", name, threshold, e),
    };
    let n = model.n_space();
    let basis = Basis::new(DMatrix::identity(n, n), true);
    let projector = match build_projector(&basis, &SamplingPlan::all_rows(n), false, None) {
        Ok(p) => p,
        Err(e) => return Check::failed("degeneracy", name, threshold, e),
    };
    let built = match method {
        RomMethod::Galerkin => rom::galerkin(&model, &mu, &basis),
        RomMethod::Deim => rom::deim(&model, &mu, &basis, &projector),
        RomMethod::DeimSns => rom::deim_sns(&model, &mu, &basis, &projector),
        RomMethod::Lspg => rom::lspg(&model, &mu, &basis),
        RomMethod::Gnat => rom::gnat(&model, &mu, &basis, &projector),
        RomMethod::GnatSns => rom::gnat_sns(&model, &mu, &basis, &projector),
    };
    let u0 = &fom.states[0];
    match built.and_then(|r| solve_tight(r, &id)) {
        Ok(x) => Check::measured("degeneracy", name, max_state_gap(&rom::lift(&basis, &x, u0), &fom.states), threshold),
        Err(e) => Check::failed("degeneracy", name, threshold, e),
    }
}

fn training_basis(model: &dyn SemiDiscreteModel, mu: &ParameterPoint, scheme: &SchemeId, n: usize) -> Result<Basis, String> {
    let traj = solve_fom(model, mu, scheme, &IntegrationOptions::default()).map_err(|e| e.to_string())?;
    let snaps = solution_snapshots(std::slice::from_ref(&traj), std::slice::from_ref(mu), scheme.scheme);
    Pod::compute(&snaps, Execution::Sequential).and_then(|p| p.basis(n)).map_err(|e| e.to_string())
}

/// GNAT with as many samples as residual basis vectors against the
/// interpolatory DEIM-SNS system on the same projector.
pub fn gnat_interpolation_equivalence() -> Check {
    let name = "gnat n_z = n_r vs deim_sns".to_string();
    let threshold = 1e-10;
    let (model, mu) = small_burgers();
    let id = SchemeId::over(Scheme::BackwardEuler, 0.2, INCLUSION_STEPS);
    let run = || -> Result<f64, String> {
        let basis = training_basis(&model, &mu, &id, 8)?;
        let proj = orthogonalized_projector(&sns_basis(&basis, model.mass()), SamplingMethod::GnatGreedy, 8, None)
            .map_err(|e| e.to_string())?;
        let g = solve_tight(rom::gnat(&model, &mu, &basis, &proj).map_err(|e| e.to_string())?, &id).map_err(|e| e.to_string())?;
        let d = solve_tight(rom::deim_sns(&model, &mu, &basis, &proj).map_err(|e| e.to_string())?, &id)
            .map_err(|e| e.to_string())?;
        Ok((g - &d).amax() / d.amax().max(1.0))
    };
    match run() {
        Ok(v) => Check::measured("degeneracy", name, v, threshold),
        Err(e) => Check::failed("degeneracy", name, threshold, e),
    }
}

/// A single-step space-time basis `[1] (x) Phi`.
fn single_step(spatial: &DMatrix<f64>) -> SpaceTimeBasis {
    SpaceTimeBasis {
        spatial: spatial.clone(),
        temporal: DMatrix::from_element(1, 1, 1.0),
        pairs: (0..spatial.ncols()).map(|i| (i, 0)).collect(),
        spatial_sv: vec![1.0; spatial.ncols()],
        temporal_sv: vec![1.0],
    }
}

/// One-step space-time LSPG and GNAT against their spatial counterparts.
pub fn single_step_space_time() -> Vec<Check> {
    let threshold = 1e-8;
    let (model, mu) = small_burgers();
    let training = SchemeId::over(Scheme::BackwardEuler, 0.2, INCLUSION_STEPS);
    let one = SchemeId::new(Scheme::BackwardEuler, 0.01, 1);
    let run = || -> Result<(f64, f64), String> {
        let basis = training_basis(&model, &mu, &training, 6)?;
        let st_basis = single_step(&basis.columns);
        let spatial_lspg = solve_tight(rom::lspg(&model, &mu, &basis).map_err(|e| e.to_string())?, &one).map_err(|e| e.to_string())?;
        let problem = SpaceTimeProblem::new(&model, &mu, &st_basis, one.dt).map_err(|e| e.to_string())?;
        let st_lspg = problem.solve_lspg(&tight_gauss_newton(), None).map_err(|e| e.to_string())?;
        let x = spatial_lspg.column(1);
        let lspg_gap = (&st_lspg.x - x).amax() / x.amax().max(1.0);

        let residual = training_basis(&model, &mu, &training, 10)?;
        let proj = orthogonalized_projector(&residual, SamplingMethod::GnatGreedy, 16, None).map_err(|e| e.to_string())?;
        let spatial_gnat =
            solve_tight(rom::gnat(&model, &mu, &basis, &proj).map_err(|e| e.to_string())?, &one).map_err(|e| e.to_string())?;
        let st_proj = SpaceTimeProjector::new(&single_step(&proj.basis.columns), proj.plan.clone()).map_err(|e| e.to_string())?;
        let st_gnat = problem.solve_sampled(&st_proj, &tight_gauss_newton()).map_err(|e| e.to_string())?;
        let x = spatial_gnat.column(1);
        Ok((lspg_gap, (&st_gnat.x - x).amax() / x.amax().max(1.0)))
    };
    match run() {
        Ok((a, b)) => vec![
            Check::measured("degeneracy", "single step st_lspg vs lspg".into(), a, threshold),
            Check::measured("degeneracy", "single step st_gnat vs gnat".into(), b, threshold),
        ],
        Err(e) => vec![Check::failed("degeneracy", "single step space-time".into(), threshold, e)],
    }
}

pub fn inclusion_suite() -> Vec<Check> {
    Scheme::ALL.into_iter().map(subspace_inclusion).collect()
}

pub fn degeneracy_suite() -> Vec<Check> {
    let mut out: Vec<Check> = RomMethod::ALL
        .into_iter()
        .flat_map(|m| Scheme::ALL.into_iter().map(move |s| full_basis_equivalence(m, s)))
        .collect();
    out.push(gnat_interpolation_equivalence());
    out.extend(single_step_space_time());
    out
}

/// Every suite, with `seed` driving the randomized projector cases.
pub fn run_all(seed: u64) -> Vec<Check> {
    let mut out = inclusion_suite();
    out.extend(projector_properties(200, seed));
    out.extend(degeneracy_suite());
    out
}
