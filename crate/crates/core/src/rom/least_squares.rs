//! Gauss-Newton time marching for residual-minimizing reduced models.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};

use super::{RomError, RomTrajectory, RowEvaluator};
use crate::compression::Basis;
use crate::fom::{ModelError, ParameterPoint, SemiDiscreteModel};
use crate::hyper::{select_rows, ObliqueProjector};
use crate::integrators::{Scheme, SchemeId, StepRule};
use crate::linalg::{lstsq, pinv, LinalgError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussNewtonTolerances {
    /// Stop once `||step|| <= step_relative * (1 + ||x||)`.
    pub step_relative: f64,
    /// Stop once the weighted residual norm drops below this fraction of its initial value.
    pub reduction: f64,
    /// Stop once `||A^T r|| <= stationarity ||A|| ||r||` for the step Jacobian `A`.
    pub stationarity: f64,
    pub max_iterations: usize,
}

impl Default for GaussNewtonTolerances {
    fn default() -> Self {
        Self { step_relative: 1e-8, reduction: 1e-10, stationarity: 1e-7, max_iterations: 20 }
    }
}

const MAX_HALVINGS: usize = 10;

/// A residual seen during a solve, kept for building residual bases.
#[derive(Debug, Clone)]
pub struct RecordedResidual {
    pub step: usize,
    pub iteration: usize,
    pub value: DVector<f64>,
}

/// `min ||W Z^T r(u0 + Phi x)||` per step, where `W` is the identity (all rows)
/// or the gappy reconstruction operator `(Z^T Phi_r)^+`.
pub struct LeastSquaresRom<'a> {
    eval: RowEvaluator<'a>,
    /// `Z^T M Phi`.
    mass_basis: DMatrix<f64>,
    weight: Option<DMatrix<f64>>,
    /// `W Z^T M Phi`.
    weighted_mass_basis: DMatrix<f64>,
    /// `(W Z^T M Phi)^+ W`, the update map of explicit steps.
    explicit_map: DMatrix<f64>,
    pub tolerances: GaussNewtonTolerances,
}

struct Past {
    x: DVector<f64>,
    time: f64,
    velocity: Option<DVector<f64>>,
}

impl<'a> LeastSquaresRom<'a> {
    pub fn lspg(model: &'a dyn SemiDiscreteModel, mu: &ParameterPoint, basis: &Basis) -> Result<Self, RomError> {
        let eval = RowEvaluator::full(model, mu, basis)?;
        let mass_basis = model.mass().apply_mat(&basis.columns);
        Self::assemble(eval, mass_basis, None)
    }

    pub fn sampled(
        model: &'a dyn SemiDiscreteModel,
        mu: &ParameterPoint,
        basis: &Basis,
        projector: &ObliqueProjector,
    ) -> Result<Self, RomError> {
        let rows = &projector.plan.indices;
        let eval = RowEvaluator::sampled(model, mu, basis, rows)?;
        let mass_basis = select_rows(&model.mass().apply_mat(&basis.columns), rows);
        Self::assemble(eval, mass_basis, Some(projector.pseudo_inverse.clone()))
    }

    fn assemble(eval: RowEvaluator<'a>, mass_basis: DMatrix<f64>, weight: Option<DMatrix<f64>>) -> Result<Self, RomError> {
        let weighted_mass_basis = match &weight {
            Some(w) => w * &mass_basis,
            None => mass_basis.clone(),
        };
        let n = weighted_mass_basis.ncols();
        if weighted_mass_basis.nrows() < n {
            return Err(RomError::Config(format!(
                "weighted residual has {} rows for {n} unknowns",
                weighted_mass_basis.nrows()
            )));
        }
        let p = pinv(&weighted_mass_basis);
        let explicit_map = match &weight {
            Some(w) => p * w,
            None => p,
        };
        Ok(Self { eval, mass_basis, weight, weighted_mass_basis, explicit_map, tolerances: GaussNewtonTolerances::default() })
    }

    pub fn evaluator(&self) -> &RowEvaluator<'a> {
        &self.eval
    }

    pub fn dim(&self) -> usize {
        self.mass_basis.ncols()
    }

    fn weigh(&self, r: &DVector<f64>) -> DVector<f64> {
        match &self.weight {
            Some(w) => w * r,
            None => r.clone(),
        }
    }

    /// Marches from `x = 0`; with `record`, every residual visited is returned.
    pub fn solve(&self, scheme: &SchemeId, record: bool) -> Result<(RomTrajectory, Vec<RecordedResidual>), RomError> {
        self.eval.reset_counters();
        let n = self.dim();
        let mut generalized = DMatrix::zeros(n, scheme.n_steps + 1);
        let mut newton_counts = Vec::with_capacity(scheme.n_steps);
        let mut recorded = Vec::new();
        let depth = scheme.scheme.history_depth();
        let mut history: VecDeque<Past> = VecDeque::from([Past { x: DVector::zeros(n), time: 0.0, velocity: None }]);
        for step in 1..=scheme.n_steps {
            let time = step as f64 * scheme.dt;
            let (x, velocity, iterations) = if scheme.scheme == Scheme::MidpointRk2 {
                self.midpoint_step(scheme.dt, step, &mut history, record.then_some(&mut recorded))?
            } else {
                let rule = scheme.rule(step);
                let known = self.history_term(&rule, scheme.dt, &mut history)?;
                if rule.is_explicit() {
                    let x = self.explicit_solve(&history[0].x, &known, rule.alpha[0], step, record.then_some(&mut recorded));
                    (x, None, 1)
                } else {
                    self.gauss_newton(&rule, scheme.dt, time, &known, history[0].x.clone(), step, record.then_some(&mut recorded))?
                }
            };
            if x.iter().any(|v| !v.is_finite()) {
                return Err(RomError::NonFinite { step });
            }
            generalized.set_column(step, &x);
            newton_counts.push(iterations);
            history.push_front(Past { x, time, velocity });
            history.truncate(depth);
        }
        Ok((RomTrajectory { generalized, newton_counts, counters: self.eval.counters() }, recorded))
    }

    fn sampled_velocity<'h>(&self, past: &'h mut Past) -> Result<&'h DVector<f64>, RomError> {
        if past.velocity.is_none() {
            past.velocity = Some(self.eval.velocity(&past.x, past.time)?);
        }
        Ok(past.velocity.as_ref().expect("just filled"))
    }

    /// `Z^T M Phi sum_{j>=1} alpha_j x^{n-j} - dt sum_{j>=1} beta_j Z^T f^{n-j}`.
    fn history_term(&self, rule: &StepRule, dt: f64, history: &mut VecDeque<Past>) -> Result<DVector<f64>, RomError> {
        let needed = rule.alpha.len() - 1;
        if history.len() < needed {
            return Err(RomError::Config(format!("step rule needs {needed} past states, have {}", history.len())));
        }
        let mut states = DVector::zeros(self.dim());
        let mut forcing = DVector::zeros(self.eval.n_rows());
        for j in 1..=needed {
            if rule.alpha[j] != 0.0 {
                states.axpy(rule.alpha[j], &history[j - 1].x, 1.0);
            }
            if rule.beta[j] != 0.0 {
                let f = self.sampled_velocity(&mut history[j - 1])?;
                forcing.axpy(rule.beta[j], f, 1.0);
            }
        }
        Ok(&self.mass_basis * states - forcing * dt)
    }

    /// Minimizer of the affine residual `alpha0 Z^T M Phi x + known`.
    fn explicit_solve(
        &self,
        guess: &DVector<f64>,
        known: &DVector<f64>,
        alpha0: f64,
        step: usize,
        record: Option<&mut Vec<RecordedResidual>>,
    ) -> DVector<f64> {
        let x = &self.explicit_map * known * (-1.0 / alpha0);
        if let Some(out) = record {
            for (iteration, point) in [guess, &x].into_iter().enumerate() {
                let value = &self.mass_basis * point * alpha0 + known;
                out.push(RecordedResidual { step, iteration, value });
            }
        }
        x
    }

    fn midpoint_step(
        &self,
        dt: f64,
        step: usize,
        history: &mut VecDeque<Past>,
        mut record: Option<&mut Vec<RecordedResidual>>,
    ) -> Result<(DVector<f64>, Option<DVector<f64>>, usize), RomError> {
        let start = history[0].x.clone();
        let t = history[0].time;
        let f0 = self.sampled_velocity(&mut history[0])?.clone();
        let base = -(&self.mass_basis * &start);
        let half = self.explicit_solve(&start, &(&base - f0 * (0.5 * dt)), 1.0, step, record.as_deref_mut());
        let f_half = self.eval.velocity(&half, t + 0.5 * dt)?;
        let x = self.explicit_solve(&start, &(base - f_half * dt), 1.0, step, record);
        Ok((x, None, 2))
    }

    #[allow(clippy::too_many_arguments)]
    fn gauss_newton(
        &self,
        rule: &StepRule,
        dt: f64,
        time: f64,
        known: &DVector<f64>,
        mut x: DVector<f64>,
        step: usize,
        mut record: Option<&mut Vec<RecordedResidual>>,
    ) -> Result<(DVector<f64>, Option<DVector<f64>>, usize), RomError> {
        let tol = &self.tolerances;
        let c_mass = rule.alpha[0];
        let c_jac = -dt * rule.beta[0];
        let residual = |f: &DVector<f64>, x: &DVector<f64>| &self.mass_basis * x * c_mass + known + f * c_jac;
        let (mut f, mut jac) = self.eval.velocity_and_jacobian(&x, time)?;
        let mut r = residual(&f, &x);
        let mut weighted = self.weigh(&r);
        if let Some(out) = record.as_deref_mut() {
            out.push(RecordedResidual { step, iteration: 0, value: r.clone() });
        }
        let initial = weighted.norm();
        let mut iterations = 0;
        if initial == 0.0 {
            return Ok((x, Some(f), iterations));
        }
        loop {
            if iterations == tol.max_iterations {
                return Err(RomError::GaussNewton { step, iterations, residual_norm: weighted.norm() });
            }
            let mut a = &self.weighted_mass_basis * c_mass;
            match &self.weight {
                Some(w) => a += w * &jac * c_jac,
                None => a += &jac * c_jac,
            }
            if a.tr_mul(&weighted).norm() <= tol.stationarity * a.norm() * weighted.norm() {
                return Ok((x, Some(f), iterations));
            }
            let mut delta = -least_squares(&a, &weighted)?;
            let current = weighted.norm();
            let mut halvings = 0;
            loop {
                let trial = &x + &delta;
                if !trial.iter().all(|v| v.is_finite()) {
                    return Err(RomError::NonFinite { step });
                }
                // Steps that leave the admissible states or grow the residual are shortened.
                match self.eval.velocity_and_jacobian(&trial, time) {
                    Ok((f_t, jac_t)) => {
                        let r_t = residual(&f_t, &trial);
                        let w_t = self.weigh(&r_t);
                        if halvings == MAX_HALVINGS || w_t.norm() <= current * (1.0 + 1e-10) {
                            (x, f, jac, r, weighted) = (trial, f_t, jac_t, r_t, w_t);
                            break;
                        }
                    }
                    Err(RomError::Model(ModelError::NonPhysical { .. })) if halvings < MAX_HALVINGS => {}
                    Err(e) => return Err(e),
                }
                delta *= 0.5;
                halvings += 1;
            }
            iterations += 1;
            if let Some(out) = record.as_deref_mut() {
                out.push(RecordedResidual { step, iteration: iterations, value: r.clone() });
            }
            if delta.norm() <= tol.step_relative * (1.0 + x.norm()) || weighted.norm() <= tol.reduction * initial {
                return Ok((x, Some(f), iterations));
            }
        }
    }
}

/// Least squares through the normal equations, with QR when they are not positive definite.
fn least_squares(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>, LinalgError> {
    if a.nrows() >= a.ncols() {
        let at = a.transpose();
        if let Some(ch) = (&at * a).cholesky() {
            return Ok(ch.solve(&(at * b)));
        }
    }
    lstsq(a, b)
}
