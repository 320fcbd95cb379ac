use nalgebra::DVector;
use proptest::prelude::*;

use snsrom::fom::{
    burgers_model, diffusion_model, euler_initial_state, euler_model, godunov_flux, normal_shock, nozzle_area,
    nozzle_area_segment, roe_flux, ParamDomain, ParameterPoint, SemiDiscreteModel, GAMMA,
};

/// Godunov flux for a convex flux: min of `f` over `[l, r]` if `l <= r`, max over `[r, l]` otherwise.
fn godunov_oracle(l: f64, r: f64) -> f64 {
    let f = |w: f64| 0.5 * w * w;
    if l <= r {
        if l <= 0.0 && 0.0 <= r {
            0.0
        } else {
            f(l).min(f(r))
        }
    } else {
        f(l).max(f(r))
    }
}

fn physical_flux(w: [f64; 3]) -> [f64; 3] {
    let u = w[1] / w[0];
    let p = (GAMMA - 1.0) * (w[2] - 0.5 * w[0] * u * u);
    [w[1], w[1] * u + p, u * (w[2] + p)]
}

fn fd_jacobian_error(model: &dyn SemiDiscreteModel, u: &DVector<f64>, mu: &ParameterPoint) -> f64 {
    let jac = model.jacobian(u, 0.0, mu).unwrap().to_dense();
    let n = u.len();
    let mut worst: f64 = 0.0;
    for j in 0..n {
        let h = 1e-6 * u[j].abs().max(1.0);
        let mut up = u.clone();
        let mut dn = u.clone();
        up[j] += h;
        dn[j] -= h;
        let col = (model.velocity(&up, 0.0, mu).unwrap() - model.velocity(&dn, 0.0, mu).unwrap()) / (2.0 * h);
        worst = worst.max((col - jac.column(j)).amax() / jac.amax().max(1.0));
    }
    worst
}

fn burgers_state(n: usize) -> DVector<f64> {
    DVector::from_fn(n, |i, _| 1.0 + 0.3 * (7.0 * i as f64 / n as f64).sin())
}

#[test]
fn burgers_velocity_matches_finite_volume_oracle() {
    let n = 40;
    let model = burgers_model(n).unwrap();
    let mu = ParameterPoint::new(vec![1.3, 0.021]);
    let u = burgers_state(n);
    let v = model.velocity(&u, 0.0, &mu).unwrap();
    let dx = 1.0 / n as f64;
    for i in 0..n {
        let l = if i == 0 { 1.3 } else { u[i - 1] };
        let r = if i + 1 == n { u[i] } else { u[i + 1] };
        let x = (i as f64 + 0.5) * dx;
        let expected = -(godunov_oracle(u[i], r) - godunov_oracle(l, u[i])) / dx + 0.02 * (0.021 * x).exp();
        assert!((v[i] - expected).abs() < 1e-12 * expected.abs().max(1.0), "row {i}");
    }
}

#[test]
fn burgers_jacobian_matches_finite_differences() {
    let model = burgers_model(30).unwrap();
    let mu = ParameterPoint::new(vec![1.4, 0.024]);
    assert!(fd_jacobian_error(&model, &burgers_state(30), &mu) < 1e-6);
}

#[test]
fn burgers_rows_agree_with_full_velocity() {
    let model = burgers_model(25).unwrap();
    let mu = ParameterPoint::new(vec![1.2, 0.02]);
    let u = burgers_state(25);
    let full = model.velocity(&u, 0.0, &mu).unwrap();
    let rows = [0, 7, 13, 24];
    let part = model.velocity_rows(&u, &rows, 0.0, &mu).unwrap();
    for (k, &r) in rows.iter().enumerate() {
        assert_eq!(part[k], full[r]);
    }
    let jac = model.jacobian(&u, 0.0, &mu).unwrap();
    for (k, row) in model.jacobian_rows(&u, &rows, 0.0, &mu).unwrap().iter().enumerate() {
        for &(c, v) in row {
            assert_eq!(v, jac.get(rows[k], c));
            assert!(model.stencil(rows[k]).contains(&c));
        }
    }
}

#[test]
fn burgers_rejects_bad_parameters() {
    let model = burgers_model(10).unwrap();
    assert!(model.velocity(&DVector::from_element(10, 1.0), 0.0, &ParameterPoint::new(vec![1.3])).is_err());
    assert!(burgers_model(1).is_err());
    let domain = ParamDomain::new(vec![1.2, 0.02], vec![1.5, 0.025]);
    assert!(domain.check(&ParameterPoint::new(vec![1.6, 0.02])).is_err());
    assert!(domain.check(&ParameterPoint::new(vec![1.5, 0.025])).is_ok());
}

#[test]
fn diffusion_mass_integrates_the_unit_square() {
    let model = diffusion_model(6).unwrap();
    let ones = DVector::from_element(model.n_space(), 1.0);
    let total = ones.dot(&model.mass().apply(&ones));
    assert!((total - 1.0).abs() < 1e-13);
}

#[test]
fn diffusion_conserves_total_mass_and_fixes_constants() {
    let model = diffusion_model(5).unwrap();
    let mu = ParameterPoint::new(Vec::<f64>::new());
    let n = model.n_space();
    let constant = DVector::from_element(n, 2.5);
    assert!(model.velocity(&constant, 0.0, &mu).unwrap().amax() < 1e-12);
    let u = model.initial_state(&mu).unwrap();
    let v = model.velocity(&u, 0.0, &mu).unwrap();
    // Natural boundaries: the weak form tested against 1 vanishes.
    assert!(v.sum().abs() < 1e-10 * v.amax().max(1.0));
    let k = model.stiffness(&u).to_dense();
    assert!((k.clone() - k.transpose()).amax() < 1e-12 * k.amax());
}

#[test]
fn diffusion_jacobian_matches_finite_differences() {
    let model = diffusion_model(4).unwrap();
    let mu = ParameterPoint::new(Vec::<f64>::new());
    let u = DVector::from_fn(model.n_space(), |i, _| 1.0 + 0.5 * ((i * 37 % 11) as f64 / 11.0));
    assert!(fd_jacobian_error(&model, &u, &mu) < 1e-6);
}

#[test]
fn nozzle_area_is_continuous_and_symmetric() {
    for (seg, x) in [(0, 0.25), (1, 0.5), (2, 0.75)] {
        let left = nozzle_area_segment(seg, x);
        let right = nozzle_area_segment(seg + 1, x);
        assert!((left - right).abs() < 1e-12, "joint at {x}");
    }
    assert!((nozzle_area(0.0).unwrap() - 0.2).abs() < 1e-12);
    assert!((nozzle_area(1.0).unwrap() - 0.2).abs() < 1e-12);
    assert!(nozzle_area(1.5).is_err());
}

#[test]
fn normal_shock_satisfies_jump_conditions() {
    let (rho, u, p) = (0.5, 900.0, 1.0e5);
    let (rho2, u2, p2) = normal_shock(rho, u, p).unwrap();
    let upstream = physical_flux([rho, rho * u, p / (GAMMA - 1.0) + 0.5 * rho * u * u]);
    let downstream = physical_flux([rho2, rho2 * u2, p2 / (GAMMA - 1.0) + 0.5 * rho2 * u2 * u2]);
    for k in 0..3 {
        assert!((upstream[k] - downstream[k]).abs() < 1e-9 * upstream[k].abs(), "component {k}");
    }
    assert!(u2 < u && p2 > p);
}

#[test]
fn euler_initial_state_is_physical() {
    let mu = ParameterPoint::new(vec![1.72, 1.71]);
    let w = euler_initial_state(&mu, 40).unwrap();
    for i in 0..40 {
        let (rho, m, e) = (w[3 * i], w[3 * i + 1], w[3 * i + 2]);
        let p = (GAMMA - 1.0) * (e - 0.5 * m * m / rho);
        assert!(rho > 0.0 && p > 0.0 && m > 0.0, "cell {i}");
    }
    assert!(euler_initial_state(&ParameterPoint::new(vec![1.71]), 40).is_err());
}

#[test]
fn euler_jacobian_matches_finite_differences() {
    let model = euler_model(12).unwrap();
    let mu = ParameterPoint::new(vec![1.71, 1.71]);
    let u = model.initial_state(&mu).unwrap();
    let jac = model.jacobian(&u, 0.0, &mu).unwrap().to_dense();
    let mut worst: f64 = 0.0;
    for j in 0..u.len() {
        let h = 1e-7 * u[j].abs().max(1.0);
        let mut up = u.clone();
        let mut dn = u.clone();
        up[j] += h;
        dn[j] -= h;
        let col = (model.velocity(&up, 0.0, &mu).unwrap() - model.velocity(&dn, 0.0, &mu).unwrap()) / (2.0 * h);
        worst = worst.max((col - jac.column(j)).amax());
    }
    assert!(worst < 1e-6 * jac.amax(), "worst {worst} against {}", jac.amax());
}

proptest! {
    #[test]
    fn godunov_flux_matches_convex_oracle(l in -3.0f64..3.0, r in -3.0f64..3.0) {
        prop_assert!((godunov_flux(l, r) - godunov_oracle(l, r)).abs() < 1e-14);
    }

    #[test]
    fn roe_flux_is_consistent(rho in 0.1f64..10.0, u in -500.0f64..500.0, p in 1e4f64..1e6) {
        let w = [rho, rho * u, p / (GAMMA - 1.0) + 0.5 * rho * u * u];
        let f = roe_flux(w, w).unwrap();
        let exact = physical_flux(w);
        for k in 0..3 {
            prop_assert!((f[k] - exact[k]).abs() <= 1e-9 * exact[k].abs().max(1.0));
        }
    }

    #[test]
    fn burgers_velocity_rows_read_only_the_stencil(seed in 0u64..1000) {
        let n = 20;
        let model = burgers_model(n).unwrap();
        let mu = ParameterPoint::new(vec![1.3, 0.022]);
        let u = DVector::from_fn(n, |i, _| 1.0 + ((i as u64 * 31 + seed) % 17) as f64 / 17.0);
        let row = (seed as usize) % n;
        let mut scratch = DVector::from_element(n, f64::NAN);
        for &s in &model.stencil(row) {
            scratch[s] = u[s];
        }
        let a = model.velocity_rows(&scratch, &[row], 0.0, &mu).unwrap();
        let b = model.velocity_rows(&u, &[row], 0.0, &mu).unwrap();
        prop_assert_eq!(a[0], b[0]);
    }
}
