use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use snsrom::fom::{burgers_model, ModelError, ParameterPoint};
use snsrom::integrators::{
    integrate, solve_fom, IntegrationOptions, NewtonTolerances, OdeSystem, Scheme, SchemeId,
};
use snsrom::linalg::{BandMatrix, MassOperator, SystemMatrix};

/// `M du/dt = A u` with tridiagonal `M` and `A`.
struct Linear {
    a: DMatrix<f64>,
    mass: MassOperator,
}

impl Linear {
    fn new(n: usize, with_mass: bool) -> Self {
        let a = DMatrix::from_fn(n, n, |i, j| match i as isize - j as isize {
            0 => -2.0 - 0.1 * i as f64,
            1 | -1 => 0.7,
            _ => 0.0,
        });
        let mass = if with_mass {
            let m = DMatrix::from_fn(n, n, |i, j| match i as isize - j as isize {
                0 => 4.0 / 6.0,
                1 | -1 => 1.0 / 6.0,
                _ => 0.0,
            });
            MassOperator::banded(BandMatrix::from_dense(&m, 1, 1)).unwrap()
        } else {
            MassOperator::Identity(n)
        };
        Self { a, mass }
    }

    fn exact(&self, u0: &DVector<f64>, t: f64) -> DVector<f64> {
        let generator = self.mass.solve_mat(&self.a) * t;
        generator.exp() * u0
    }
}

impl OdeSystem for Linear {
    fn dim(&self) -> usize {
        self.a.nrows()
    }

    fn mass(&self) -> &MassOperator {
        &self.mass
    }

    fn velocity(&self, u: &DVector<f64>, _t: f64) -> Result<DVector<f64>, ModelError> {
        Ok(&self.a * u)
    }

    fn jacobian(&self, _u: &DVector<f64>, _t: f64) -> Result<SystemMatrix, ModelError> {
        Ok(SystemMatrix::Dense(self.a.clone()))
    }
}

fn u0(n: usize) -> DVector<f64> {
    DVector::from_fn(n, |i, _| (1.0 + i as f64).sin() + 1.5)
}

fn final_error(sys: &Linear, scheme: Scheme, n_steps: usize) -> f64 {
    let id = SchemeId::over(scheme, 1.0, n_steps);
    let traj = integrate(sys, &id, u0(sys.dim()), &IntegrationOptions::default()).unwrap();
    let exact = sys.exact(&u0(sys.dim()), 1.0);
    (traj.final_state() - &exact).norm() / exact.norm()
}

#[test]
fn every_scheme_converges_at_its_order() {
    for with_mass in [false, true] {
        let sys = Linear::new(6, with_mass);
        for scheme in Scheme::ALL {
            let coarse = final_error(&sys, scheme, 40);
            let fine = final_error(&sys, scheme, 80);
            let observed = (coarse / fine).log2();
            let expected = scheme.order() as f64;
            assert!(
                (observed - expected).abs() < 0.25,
                "{} (mass {with_mass}): observed order {observed:.3}",
                scheme.name()
            );
        }
    }
}

#[test]
fn one_step_updates_match_closed_forms() {
    let sys = Linear::new(5, true);
    let u = u0(5);
    let dt = 0.05;
    let m = sys.mass.to_dense();
    let step = |scheme| {
        let traj = integrate(&sys, &SchemeId::new(scheme, dt, 1), u.clone(), &IntegrationOptions::default()).unwrap();
        traj.states[1].clone()
    };
    let fe = &u + m.clone().lu().solve(&(&sys.a * &u * dt)).unwrap();
    let be = (&m - &sys.a * dt).lu().solve(&(&m * &u)).unwrap();
    let k1 = m.clone().lu().solve(&(&sys.a * &u)).unwrap();
    let half = &u + &k1 * (0.5 * dt);
    let rk2 = &u + m.clone().lu().solve(&(&sys.a * &half)).unwrap() * dt;
    assert!((step(Scheme::ForwardEuler) - fe).amax() < 1e-13);
    assert!((step(Scheme::BackwardEuler) - &be).amax() < 1e-10);
    assert!((step(Scheme::MidpointRk2) - rk2).amax() < 1e-13);
    // Two-step schemes start with a one-step method.
    assert!((step(Scheme::Bdf2) - &be).amax() < 1e-10);
    assert!((step(Scheme::AdamsMoulton2) - &be).amax() < 1e-10);
}

#[test]
fn explicit_steps_use_no_newton_iterations() {
    let model = burgers_model(30).unwrap();
    let mu = ParameterPoint::new(vec![1.3, 0.021]);
    for scheme in Scheme::ALL {
        let traj = solve_fom(&model, &mu, &SchemeId::over(scheme, 0.1, 20), &IntegrationOptions::default()).unwrap();
        assert_eq!(traj.states.len(), 21);
        assert_eq!(traj.times.len(), 21);
        assert!((traj.times[20] - 0.1).abs() < 1e-14);
        if scheme.is_explicit() {
            assert!(traj.newton_iterations.iter().all(|&k| k == 0), "{}", scheme.name());
        } else {
            assert!(traj.newton_iterations.iter().all(|&k| k > 0), "{}", scheme.name());
        }
        if scheme == Scheme::MidpointRk2 {
            assert_eq!(traj.half_states.len(), 20);
        }
    }
}

#[test]
fn recorded_velocities_cover_every_step() {
    let model = burgers_model(20).unwrap();
    let mu = ParameterPoint::new(vec![1.3, 0.021]);
    let options = IntegrationOptions { record_velocities: true, ..Default::default() };
    let traj = solve_fom(&model, &mu, &SchemeId::over(Scheme::ForwardEuler, 0.1, 10), &options).unwrap();
    assert_eq!(traj.velocities.len(), 10);
    for (k, snap) in traj.velocities.iter().enumerate() {
        let expected = (&traj.states[k + 1] - &traj.states[k]) / 0.01;
        assert!((&snap.value - expected).amax() < 1e-9);
    }
}

#[test]
fn implicit_steps_meet_the_newton_tolerance() {
    let model = burgers_model(40).unwrap();
    let mu = ParameterPoint::new(vec![1.5, 0.025]);
    let tolerances = NewtonTolerances { relative: 1e-12, absolute: 1e-13, step_relative: 1e-15, max_iterations: 50 };
    let options = IntegrationOptions { tolerances, ..Default::default() };
    let dt = 0.01;
    let traj = solve_fom(&model, &mu, &SchemeId::new(Scheme::BackwardEuler, dt, 10), &options).unwrap();
    for n in 1..=10 {
        let f = snsrom::fom::SemiDiscreteModel::velocity(&model, &traj.states[n], n as f64 * dt, &mu).unwrap();
        let r = &traj.states[n] - &traj.states[n - 1] - f * dt;
        assert!(r.norm() < 1e-10 * traj.states[n].norm(), "step {n}: {}", r.norm());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn linear_schemes_are_linear(scale in -3.0f64..3.0, idx in 0usize..6) {
        let scheme = Scheme::ALL[idx];
        let sys = Linear::new(4, true);
        let id = SchemeId::over(scheme, 0.2, 8);
        let base = integrate(&sys, &id, u0(4), &IntegrationOptions::default()).unwrap();
        let scaled = integrate(&sys, &id, u0(4) * scale, &IntegrationOptions::default()).unwrap();
        let diff = scaled.final_state() - base.final_state() * scale;
        prop_assert!(diff.amax() <= 1e-9 * base.final_state().amax().max(1.0));
    }
}
