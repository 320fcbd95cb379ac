use nalgebra::{DMatrix, DVector};

use super::*;

/// `u' = f(u)` with a dense Jacobian, identity mass.
struct Autonomous<F, J> {
    n: usize,
    mass: MassOperator,
    f: F,
    df: J,
}

impl<F, J> Autonomous<F, J>
where
    F: Fn(&DVector<f64>) -> DVector<f64> + Sync,
    J: Fn(&DVector<f64>) -> DMatrix<f64> + Sync,
{
    fn new(n: usize, f: F, df: J) -> Self {
        Self { n, mass: MassOperator::Identity(n), f, df }
    }
}

impl<F, J> OdeSystem for Autonomous<F, J>
where
    F: Fn(&DVector<f64>) -> DVector<f64> + Sync,
    J: Fn(&DVector<f64>) -> DMatrix<f64> + Sync,
{
    fn dim(&self) -> usize {
        self.n
    }
    fn mass(&self) -> &MassOperator {
        &self.mass
    }
    fn velocity(&self, u: &DVector<f64>, _t: f64) -> Result<DVector<f64>, ModelError> {
        Ok((self.f)(u))
    }
    fn jacobian(&self, u: &DVector<f64>, _t: f64) -> Result<SystemMatrix, ModelError> {
        Ok(SystemMatrix::Dense((self.df)(u)))
    }
}

fn decay() -> impl OdeSystem {
    Autonomous::new(1, |u: &DVector<f64>| -u, |_: &DVector<f64>| DMatrix::from_element(1, 1, -1.0))
}

fn quadratic() -> impl OdeSystem {
    Autonomous::new(
        1,
        |u: &DVector<f64>| u.map(|v| -v * v),
        |u: &DVector<f64>| DMatrix::from_element(1, 1, -2.0 * u[0]),
    )
}

fn scalar(v: f64) -> DVector<f64> {
    DVector::from_element(1, v)
}

fn one_step(system: &dyn OdeSystem, scheme: Scheme, dt: f64, u0: f64) -> f64 {
    let traj = integrate(system, &SchemeId::new(scheme, dt, 1), scalar(u0), &IntegrationOptions::default()).unwrap();
    traj.states[1][0]
}

#[test]
fn forward_euler_linear_decay() {
    assert!((one_step(&decay(), Scheme::ForwardEuler, 0.1, 1.0) - 0.9).abs() < 1e-15);
}

#[test]
fn backward_euler_linear_decay() {
    assert!((one_step(&decay(), Scheme::BackwardEuler, 0.1, 1.0) - 1.0 / 1.1).abs() < 1e-14);
}

#[test]
fn backward_euler_quadratic_matches_root() {
    // 0.5 x^2 + x - 1 = 0
    let root = (-1.0 + 3f64.sqrt()) / 1.0;
    assert!((one_step(&quadratic(), Scheme::BackwardEuler, 0.5, 1.0) - root).abs() < 1e-8);
    assert!((root - 0.7320508).abs() < 1e-7);
}

#[test]
fn zero_velocity_keeps_state_for_every_scheme() {
    let system = Autonomous::new(3, |u: &DVector<f64>| u * 0.0, |_: &DVector<f64>| DMatrix::zeros(3, 3));
    let u0 = DVector::from_vec(vec![1.0, -2.0, 0.5]);
    for scheme in Scheme::ALL {
        let traj = integrate(&system, &SchemeId::new(scheme, 0.1, 4), u0.clone(), &IntegrationOptions::default()).unwrap();
        for s in &traj.states {
            assert_eq!(s, &u0);
        }
        if !scheme.is_explicit() {
            assert!(traj.newton_iterations.iter().all(|&k| k == 1), "{scheme}");
        }
    }
}

#[test]
fn adams_bashforth_second_step_matches_recurrence() {
    let system = decay();
    let dt = 0.1;
    let scheme = SchemeId::new(Scheme::AdamsBashforth2, dt, 2);
    let mut history = vec![HistoryEntry::new(scalar((-dt).exp()), dt), HistoryEntry::new(scalar(1.0), 0.0)];
    let out = step_explicit(&system, &scheme, 2, &mut history).unwrap();
    // u2 = u1 + dt (3/2 (-u1) - 1/2 (-u0)) with u1 = exp(-0.1)
    assert!((out.state[0] - 0.8191118053305656).abs() < 1e-15);
}

#[test]
fn residual_of_exact_step_vanishes() {
    let system = quadratic();
    let dt = 0.5;
    let scheme = SchemeId::new(Scheme::BackwardEuler, dt, 1);
    let root = -1.0 + 3f64.sqrt();
    let mut history = vec![HistoryEntry::new(scalar(1.0), 0.0)];
    let r = residual(&system, &scheme.rule(1), dt, &scalar(root), dt, &mut history).unwrap();
    assert!(r.value.norm() < 1e-15);
    let r = residual(&system, &scheme.rule(1), dt, &scalar(1.0), dt, &mut history).unwrap();
    assert!((r.value[0] - dt).abs() < 1e-15, "BE at the old state gives -dt f = dt");
}

#[test]
fn bdf2_coefficients_match_interpolation_derivative() {
    // Derivative at t = 0 of the quadratic through t = 0, -1, -2 (unit spacing).
    let nodes = [0.0, -1.0, -2.0];
    let weights: Vec<f64> = (0..3)
        .map(|j| {
            let mut w = 0.0;
            for m in 0..3 {
                if m == j {
                    continue;
                }
                let mut term = 1.0 / (nodes[j] - nodes[m]);
                for k in 0..3 {
                    if k != j && k != m {
                        term *= (0.0 - nodes[k]) / (nodes[j] - nodes[k]);
                    }
                }
                w += term;
            }
            w
        })
        .collect();
    let rule = SchemeId::new(Scheme::Bdf2, 1.0, 2).rule(2);
    let scale = weights[0];
    for j in 0..3 {
        assert!((rule.alpha[j] - weights[j] / scale).abs() < 1e-14);
    }
    assert!((rule.beta[0] - 1.0 / scale).abs() < 1e-14);
}

#[test]
fn observed_orders_match_nominal() {
    let system = quadratic();
    let exact = 0.5; // u(1) for u' = -u^2, u(0) = 1
    for scheme in Scheme::ALL {
        let errs: Vec<f64> = [50usize, 100]
            .iter()
            .map(|&n| {
                let traj = integrate(&system, &SchemeId::over(scheme, 1.0, n), scalar(1.0), &IntegrationOptions::default()).unwrap();
                (traj.final_state()[0] - exact).abs()
            })
            .collect();
        let rate = (errs[0] / errs[1]).log2();
        assert!((rate - scheme.order() as f64).abs() < 0.2, "{scheme}: rate {rate}");
    }
}

#[test]
fn residual_jacobian_matches_finite_differences() {
    let system = Autonomous::new(
        2,
        |u: &DVector<f64>| DVector::from_vec(vec![-u[0] * u[1], u[0].sin() - u[1] * u[1] * u[1]]),
        |u: &DVector<f64>| DMatrix::from_row_slice(2, 2, &[-u[1], -u[0], u[0].cos(), -3.0 * u[1] * u[1]]),
    );
    let dt = 0.05;
    for scheme in [Scheme::BackwardEuler, Scheme::AdamsMoulton2, Scheme::Bdf2] {
        let id = SchemeId::new(scheme, dt, 3);
        let rule = id.rule(2);
        let mut history = vec![
            HistoryEntry::new(DVector::from_vec(vec![0.9, 1.1]), dt),
            HistoryEntry::new(DVector::from_vec(vec![1.0, 1.0]), 0.0),
        ];
        let u = DVector::from_vec(vec![0.8, 1.3]);
        let r = residual(&system, &rule, dt, &u, 2.0 * dt, &mut history).unwrap();
        let jac = r.jacobian.to_dense();
        let h = 1e-6;
        for c in 0..2 {
            let mut up = u.clone();
            let mut dn = u.clone();
            up[c] += h;
            dn[c] -= h;
            let rp = residual(&system, &rule, dt, &up, 2.0 * dt, &mut history).unwrap().value;
            let rm = residual(&system, &rule, dt, &dn, 2.0 * dt, &mut history).unwrap().value;
            let fd = (rp - rm) / (2.0 * h);
            for k in 0..2 {
                assert!((fd[k] - jac[(k, c)]).abs() <= 1e-5 * jac[(k, c)].abs().max(1.0));
            }
        }
    }
}

#[test]
fn recorded_velocity_counts_follow_the_scheme() {
    let system = quadratic();
    let opts = IntegrationOptions { record_velocities: true, ..Default::default() };
    let n = 5;
    for scheme in Scheme::ALL {
        let traj = integrate(&system, &SchemeId::new(scheme, 0.1, n), scalar(1.0), &opts).unwrap();
        let expected = if scheme == Scheme::MidpointRk2 { 2 * n } else { n };
        assert_eq!(traj.velocities.len(), expected, "{scheme}");
        let first = traj.velocities[0].step;
        let expected_first = if scheme.is_explicit() { 0 } else { 1 };
        assert_eq!(first, expected_first, "{scheme}");
    }
}
