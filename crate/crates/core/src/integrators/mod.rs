//! Time integrators for `M du/dt = f(u, t)`.
//!
//! Linear multistep schemes share one residual,
//! `r(u^n) = M sum_j alpha_j u^{n-j} - dt sum_j beta_j f^{n-j}`, solved in one
//! shot when `beta_0 = 0` and by Newton otherwise. The midpoint Runge-Kutta
//! scheme keeps its half-step states so they can join the snapshot set.

mod scheme;

pub use scheme::{Scheme, SchemeId, StepRule};

use nalgebra::DVector;
use thiserror::Error;

use crate::fom::{ModelError, ParameterPoint, SemiDiscreteModel};
use crate::linalg::{LinalgError, MassOperator, SystemMatrix};

#[derive(Debug, Error, Clone)]
pub enum IntegratorError {
    #[error("Newton failed at step {step} after {iterations} iterations (residual {residual_norm:.3e})")]
    Newton { step: usize, iterations: usize, residual_norm: f64, last_iterate: DVector<f64> },
    #[error("non-finite state at step {step}")]
    NonFinite { step: usize },
    #[error("history holds {found} states, scheme needs {needed}")]
    History { needed: usize, found: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// A semi-discrete system with its parameters already bound.
pub trait OdeSystem: Sync {
    fn dim(&self) -> usize;
    fn mass(&self) -> &MassOperator;
    fn velocity(&self, u: &DVector<f64>, t: f64) -> Result<DVector<f64>, ModelError>;
    fn jacobian(&self, u: &DVector<f64>, t: f64) -> Result<SystemMatrix, ModelError>;
}

/// A full-order model at a fixed parameter point.
pub struct BoundModel<'a> {
    pub model: &'a dyn SemiDiscreteModel,
    pub mu: &'a ParameterPoint,
}

impl<'a> BoundModel<'a> {
    pub fn new(model: &'a dyn SemiDiscreteModel, mu: &'a ParameterPoint) -> Self {
        Self { model, mu }
    }
}

impl OdeSystem for BoundModel<'_> {
    fn dim(&self) -> usize {
        self.model.n_space()
    }

    fn mass(&self) -> &MassOperator {
        self.model.mass()
    }

    fn velocity(&self, u: &DVector<f64>, t: f64) -> Result<DVector<f64>, ModelError> {
        self.model.velocity(u, t, self.mu)
    }

    fn jacobian(&self, u: &DVector<f64>, t: f64) -> Result<SystemMatrix, ModelError> {
        Ok(SystemMatrix::Banded(self.model.jacobian(u, t, self.mu)?))
    }
}

/// Newton stopping rule: `||r|| <= relative ||r_0|| + absolute`, or a step
/// below `step_relative (1 + ||u||)` once roundoff dominates the residual.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonTolerances {
    pub relative: f64,
    pub absolute: f64,
    pub step_relative: f64,
    pub max_iterations: usize,
}

impl Default for NewtonTolerances {
    fn default() -> Self {
        Self { relative: 1e-8, absolute: 1e-12, step_relative: 1e-12, max_iterations: 100 }
    }
}

/// A past state with its velocity once computed.
#[derive(Debug, Clone)]
pub struct HistoryEntry {
    pub state: DVector<f64>,
    pub time: f64,
    pub velocity: Option<DVector<f64>>,
}

impl HistoryEntry {
    pub fn new(state: DVector<f64>, time: f64) -> Self {
        Self { state, time, velocity: None }
    }

    fn velocity(&mut self, system: &dyn OdeSystem) -> Result<&DVector<f64>, ModelError> {
        if self.velocity.is_none() {
            self.velocity = Some(system.velocity(&self.state, self.time)?);
        }
        Ok(self.velocity.as_ref().expect("just filled"))
    }
}

/// Residual value at a candidate together with its Jacobian.
#[derive(Debug, Clone)]
pub struct ResidualEvaluation {
    pub value: DVector<f64>,
    pub jacobian: SystemMatrix,
    /// `f` at the candidate.
    pub velocity: DVector<f64>,
}

/// Known part of a multistep residual: `M sum_{j>=1} alpha_j u^{n-j} - dt sum_{j>=1} beta_j f^{n-j}`.
fn history_term(
    system: &dyn OdeSystem,
    rule: &StepRule,
    dt: f64,
    history: &mut [HistoryEntry],
) -> Result<DVector<f64>, IntegratorError> {
    let needed = rule.alpha.len() - 1;
    if history.len() < needed {
        return Err(IntegratorError::History { needed, found: history.len() });
    }
    let mut states = DVector::zeros(system.dim());
    let mut forcing = DVector::zeros(system.dim());
    for j in 1..=needed {
        let entry = &mut history[j - 1];
        if rule.alpha[j] != 0.0 {
            states.axpy(rule.alpha[j], &entry.state, 1.0);
        }
        if rule.beta[j] != 0.0 {
            forcing.axpy(rule.beta[j], entry.velocity(system)?, 1.0);
        }
    }
    Ok(system.mass().apply(&states) - forcing * dt)
}

/// Residual of the step rule at `candidate`; `history[0]` is the latest state.
pub fn residual(
    system: &dyn OdeSystem,
    rule: &StepRule,
    dt: f64,
    candidate: &DVector<f64>,
    time: f64,
    history: &mut [HistoryEntry],
) -> Result<ResidualEvaluation, IntegratorError> {
    let known = history_term(system, rule, dt, history)?;
    evaluate_with_known(system, rule, dt, candidate, time, &known)
}

fn evaluate_with_known(
    system: &dyn OdeSystem,
    rule: &StepRule,
    dt: f64,
    candidate: &DVector<f64>,
    time: f64,
    known: &DVector<f64>,
) -> Result<ResidualEvaluation, IntegratorError> {
    let velocity = system.velocity(candidate, time)?;
    let value = system.mass().apply(candidate) * rule.alpha[0] + known - &velocity * (dt * rule.beta[0]);
    let jacobian = system.jacobian(candidate, time)?.with_mass(system.mass(), rule.alpha[0], -dt * rule.beta[0]);
    Ok(ResidualEvaluation { value, jacobian, velocity })
}

/// Result of one time step.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub state: DVector<f64>,
    /// `f` at the new state when the step computed it.
    pub velocity: Option<DVector<f64>>,
    /// Midpoint state of the Runge-Kutta scheme.
    pub half_state: Option<DVector<f64>>,
    pub half_velocity: Option<DVector<f64>>,
    /// Residual evaluations performed (the converged one included).
    pub newton_iterations: usize,
    /// States visited by Newton, the converged one last.
    pub iterates: Vec<DVector<f64>>,
}

/// Explicit update for step `step` (1-based). `history[0]` holds `u^{n-1}`.
pub fn step_explicit(
    system: &dyn OdeSystem,
    scheme: &SchemeId,
    step: usize,
    history: &mut [HistoryEntry],
) -> Result<StepOutcome, IntegratorError> {
    let dt = scheme.dt;
    if history.is_empty() {
        return Err(IntegratorError::History { needed: 1, found: 0 });
    }
    if scheme.scheme == Scheme::MidpointRk2 {
        let t = history[0].time;
        let f0 = history[0].velocity(system)?.clone();
        let half = &history[0].state + system.mass().solve(&f0) * (0.5 * dt);
        let f_half = system.velocity(&half, t + 0.5 * dt)?;
        let state = &history[0].state + system.mass().solve(&f_half) * dt;
        return Ok(StepOutcome {
            state,
            velocity: None,
            half_state: Some(half),
            half_velocity: Some(f_half),
            newton_iterations: 0,
            iterates: Vec::new(),
        });
    }
    let rule = scheme.rule(step);
    debug_assert!(rule.is_explicit());
    let needed = rule.alpha.len() - 1;
    if history.len() < needed {
        return Err(IntegratorError::History { needed, found: history.len() });
    }
    let mut state = DVector::zeros(system.dim());
    let mut forcing = DVector::zeros(system.dim());
    for j in 1..=needed {
        let entry = &mut history[j - 1];
        if rule.alpha[j] != 0.0 {
            state.axpy(-rule.alpha[j] / rule.alpha[0], &entry.state, 1.0);
        }
        if rule.beta[j] != 0.0 {
            forcing.axpy(rule.beta[j], entry.velocity(system)?, 1.0);
        }
    }
    state += system.mass().solve(&forcing) * (dt / rule.alpha[0]);
    Ok(StepOutcome { state, velocity: None, half_state: None, half_velocity: None, newton_iterations: 0, iterates: Vec::new() })
}

const MAX_HALVINGS: usize = 10;

/// Newton solve of the implicit step `step` starting from `u^{n-1}`.
pub fn step_implicit(
    system: &dyn OdeSystem,
    scheme: &SchemeId,
    step: usize,
    history: &mut [HistoryEntry],
    tol: &NewtonTolerances,
    keep_iterates: bool,
) -> Result<StepOutcome, IntegratorError> {
    let rule = scheme.rule(step);
    let dt = scheme.dt;
    if history.is_empty() {
        return Err(IntegratorError::History { needed: 1, found: 0 });
    }
    let time = history[0].time + dt;
    let known = history_term(system, &rule, dt, history)?;
    let mut u = history[0].state.clone();
    let mut eval = evaluate_with_known(system, &rule, dt, &u, time, &known)?;
    let mut iterations = 1;
    let mut iterates = Vec::new();
    if keep_iterates {
        iterates.push(u.clone());
    }
    let target = tol.relative * eval.value.norm() + tol.absolute;
    let mut step_norm = f64::INFINITY;
    while eval.value.norm() > target && step_norm > tol.step_relative * (1.0 + u.norm()) {
        if iterations > tol.max_iterations {
            return Err(IntegratorError::Newton {
                step,
                iterations,
                residual_norm: eval.value.norm(),
                last_iterate: u,
            });
        }
        let mut delta = eval.jacobian.factor()?.solve(&(-&eval.value))?;
        let mut halvings = 0;
        loop {
            let trial = &u + &delta;
            if trial.iter().any(|v| !v.is_finite()) {
                return Err(IntegratorError::NonFinite { step });
            }
            // Full steps that leave the admissible states or grow the residual are shortened.
            match evaluate_with_known(system, &rule, dt, &trial, time, &known) {
                Ok(e) if halvings == MAX_HALVINGS || e.value.norm() < eval.value.norm() => {
                    u = trial;
                    eval = e;
                    break;
                }
                Ok(_) | Err(IntegratorError::Model(ModelError::NonPhysical { .. })) if halvings < MAX_HALVINGS => {
                    delta *= 0.5;
                    halvings += 1;
                }
                Err(e) => return Err(e),
                Ok(_) => unreachable!("accepted above"),
            }
        }
        step_norm = delta.norm();
        iterations += 1;
        if keep_iterates {
            iterates.push(u.clone());
        }
    }
    Ok(StepOutcome {
        state: u,
        velocity: Some(eval.velocity),
        half_state: None,
        half_velocity: None,
        newton_iterations: iterations,
        iterates,
    })
}

/// What to keep while integrating.
#[derive(Debug, Clone, Copy, Default)]
pub struct IntegrationOptions {
    pub record_velocities: bool,
    pub record_iterates: bool,
    pub tolerances: NewtonTolerances,
}

/// A velocity evaluation that entered some step's update.
#[derive(Debug, Clone)]
pub struct VelocitySnapshot {
    pub step: usize,
    pub half: bool,
    pub value: DVector<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct Trajectory {
    /// `u^0, ..., u^{N_t}`.
    pub states: Vec<DVector<f64>>,
    /// Runge-Kutta midpoints `u^{n-1/2}` for `n = 1..N_t`.
    pub half_states: Vec<DVector<f64>>,
    pub times: Vec<f64>,
    /// Nonlinear-term snapshots, ordered by step.
    pub velocities: Vec<VelocitySnapshot>,
    /// Residual evaluations per step (0 for explicit steps).
    pub newton_iterations: Vec<usize>,
    /// Newton iterates per step when requested.
    pub iterates: Vec<Vec<DVector<f64>>>,
}

impl Trajectory {
    pub fn final_state(&self) -> &DVector<f64> {
        self.states.last().expect("trajectory holds u^0")
    }
}

/// Marches `u0` through `scheme.n_steps` steps.
pub fn integrate(
    system: &dyn OdeSystem,
    scheme: &SchemeId,
    u0: DVector<f64>,
    options: &IntegrationOptions,
) -> Result<Trajectory, IntegratorError> {
    let mut traj = Trajectory::default();
    let mut history: Vec<HistoryEntry> = vec![HistoryEntry::new(u0.clone(), 0.0)];
    traj.states.push(u0);
    traj.times.push(0.0);
    // Step index at which each history entry's velocity was last recorded.
    let mut recorded: Vec<bool> = vec![false];
    let depth = scheme.scheme.history_depth();
    for step in 1..=scheme.n_steps {
        let rule = scheme.rule(step);
        let outcome = if scheme.scheme.is_explicit() {
            step_explicit(system, scheme, step, &mut history)?
        } else {
            step_implicit(system, scheme, step, &mut history, &options.tolerances, options.record_iterates)?
        };
        if outcome.state.iter().any(|v| !v.is_finite()) {
            return Err(IntegratorError::NonFinite { step });
        }
        if options.record_velocities {
            let used = if scheme.scheme == Scheme::MidpointRk2 { 1 } else { rule.beta.len() - 1 };
            for j in 1..=used.min(history.len()) {
                let uses = scheme.scheme == Scheme::MidpointRk2 || rule.beta[j] != 0.0;
                if uses && !recorded[j - 1] {
                    if let Some(v) = &history[j - 1].velocity {
                        traj.velocities.push(VelocitySnapshot { step: step - j, half: false, value: v.clone() });
                        recorded[j - 1] = true;
                    }
                }
            }
            if let Some(v) = &outcome.half_velocity {
                traj.velocities.push(VelocitySnapshot { step: step - 1, half: true, value: v.clone() });
            }
            if let (Some(v), true) = (&outcome.velocity, rule.beta[0] != 0.0) {
                traj.velocities.push(VelocitySnapshot { step, half: false, value: v.clone() });
            }
        }
        let is_implicit_step = rule.beta[0] != 0.0 && scheme.scheme != Scheme::MidpointRk2;
        traj.newton_iterations.push(outcome.newton_iterations);
        if options.record_iterates {
            traj.iterates.push(outcome.iterates);
        }
        if let Some(h) = outcome.half_state {
            traj.half_states.push(h);
        }
        let time = step as f64 * scheme.dt;
        let mut entry = HistoryEntry::new(outcome.state.clone(), time);
        entry.velocity = outcome.velocity;
        history.insert(0, entry);
        recorded.insert(0, is_implicit_step && options.record_velocities);
        history.truncate(depth);
        recorded.truncate(depth);
        traj.states.push(outcome.state);
        traj.times.push(time);
    }
    Ok(traj)
}

/// Integrates the model at `mu` from its own initial state.
pub fn solve_fom(
    model: &dyn SemiDiscreteModel,
    mu: &ParameterPoint,
    scheme: &SchemeId,
    options: &IntegrationOptions,
) -> Result<Trajectory, IntegratorError> {
    let u0 = model.initial_state(mu)?;
    integrate(&BoundModel::new(model, mu), scheme, u0, options)
}

#[cfg(test)]
mod tests;
