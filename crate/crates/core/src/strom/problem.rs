//! Residual of the backward Euler block system on a Kronecker-factored trial space.

use std::sync::Mutex;

use nalgebra::{DMatrix, DVector};

use super::{SpaceTimeProjector, StSolution};
use crate::compression::SpaceTimeBasis;
use crate::fom::{stencil_union, ModelError, ParameterPoint, SemiDiscreteModel};
use crate::linalg::MassOperator;
use crate::par::Execution;
use crate::rom::{EvalCounters, GaussNewtonTolerances, RomError};

const STEP_CHUNK: usize = 64;

/// Block lower-bidiagonal operator with `M` on the diagonal and `-M` below it.
#[derive(Debug, Clone)]
pub struct SpaceTimeOperator {
    pub mass: MassOperator,
    pub n_steps: usize,
}

impl SpaceTimeOperator {
    pub fn new(mass: MassOperator, n_steps: usize) -> Self {
        Self { mass, n_steps }
    }

    /// `A x` for a time-major stacked `x`.
    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        let ns = self.mass.dim();
        let mut out = DVector::zeros(ns * self.n_steps);
        for n in 0..self.n_steps {
            let mut diff = x.rows(n * ns, ns).into_owned();
            if n > 0 {
                diff -= x.rows((n - 1) * ns, ns);
            }
            out.rows_mut(n * ns, ns).copy_from(&self.mass.apply(&diff));
        }
        out
    }

    /// `-M u0` in the first block, zero elsewhere.
    pub fn initial_term(&self, u0: &DVector<f64>) -> DVector<f64> {
        let ns = self.mass.dim();
        let mut out = DVector::zeros(ns * self.n_steps);
        out.rows_mut(0, ns).copy_from(&(-self.mass.apply(u0)));
        out
    }

    /// `A Phi` in factored form: `(D T) (x) (M S)` with `D` the backward difference.
    pub fn apply_basis(&self, basis: &SpaceTimeBasis) -> SpaceTimeBasis {
        SpaceTimeBasis {
            spatial: self.mass.apply_mat(&basis.spatial),
            temporal: backward_difference(&basis.temporal),
            pairs: basis.pairs.clone(),
            spatial_sv: basis.spatial_sv.clone(),
            temporal_sv: basis.temporal_sv.clone(),
        }
    }
}

/// Rows `T[n] - T[n-1]` with `T[-1] = 0`.
pub fn backward_difference(t: &DMatrix<f64>) -> DMatrix<f64> {
    let mut d = t.clone();
    for n in (1..t.nrows()).rev() {
        for j in 0..t.ncols() {
            d[(n, j)] -= t[(n - 1, j)];
        }
    }
    d
}

/// Spatial-factor coefficients of every step: column `n` is `sum_p x_p T[n, j_p] e_{i_p}`.
pub fn spatial_coefficients(basis: &SpaceTimeBasis, x: &DVector<f64>) -> DMatrix<f64> {
    let mut y = DMatrix::zeros(basis.spatial.ncols(), basis.n_steps());
    for (p, &(i, j)) in basis.pairs.iter().enumerate() {
        for n in 0..basis.n_steps() {
            y[(i, n)] += x[p] * basis.temporal[(n, j)];
        }
    }
    y
}

fn coefficients_at(basis: &SpaceTimeBasis, x: &DVector<f64>, n: usize) -> DVector<f64> {
    let mut y = DVector::zeros(basis.spatial.ncols());
    for (p, &(i, j)) in basis.pairs.iter().enumerate() {
        y[i] += x[p] * basis.temporal[(n, j)];
    }
    y
}

/// Sampled rows of one time step.
struct StepRows {
    step: usize,
    /// `(position in the plan, spatial row)`.
    rows: Vec<(usize, usize)>,
    spatial_rows: Vec<usize>,
    gather: Vec<usize>,
}

/// The space-time residual `A (u0 + Phi x) + q0 - dt f(u0 + Phi x)` at one parameter.
pub struct SpaceTimeProblem<'a> {
    model: &'a dyn SemiDiscreteModel,
    mu: ParameterPoint,
    u0: DVector<f64>,
    dt: f64,
    basis: SpaceTimeBasis,
    /// `M S`.
    mass_spatial: DMatrix<f64>,
    /// `D T`.
    diff_temporal: DMatrix<f64>,
    exec: Execution,
    counters: Mutex<EvalCounters>,
}

impl<'a> SpaceTimeProblem<'a> {
    pub fn new(model: &'a dyn SemiDiscreteModel, mu: &ParameterPoint, basis: &SpaceTimeBasis, dt: f64) -> Result<Self, RomError> {
        if basis.n_space() != model.n_space() {
            return Err(RomError::Config(format!("basis has {} rows, model {}", basis.n_space(), model.n_space())));
        }
        Ok(Self {
            model,
            mu: mu.clone(),
            u0: model.initial_state(mu)?,
            dt,
            mass_spatial: model.mass().apply_mat(&basis.spatial),
            diff_temporal: backward_difference(&basis.temporal),
            basis: basis.clone(),
            exec: Execution::default(),
            counters: Mutex::default(),
        })
    }

    pub fn with_execution(mut self, exec: Execution) -> Self {
        self.exec = exec;
        self
    }

    pub fn width(&self) -> usize {
        self.basis.width()
    }

    pub fn initial_state(&self) -> &DVector<f64> {
        &self.u0
    }

    pub fn counters(&self) -> EvalCounters {
        *self.counters.lock().expect("counter lock")
    }

    /// `u^1..u^{N_t}` as columns.
    pub fn states(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let mut u = &self.basis.spatial * spatial_coefficients(&self.basis, x);
        for mut col in u.column_iter_mut() {
            col += &self.u0;
        }
        u
    }

    /// Least-squares coordinates of the trajectory `u^1..u^{N_t}`.
    pub fn project(&self, states: &[DVector<f64>]) -> Result<DVector<f64>, RomError> {
        let s = &self.basis.spatial;
        let t = &self.basis.temporal;
        let mut shifted = DMatrix::zeros(self.u0.len(), states.len());
        for (n, u) in states.iter().enumerate() {
            shifted.set_column(n, &(u - &self.u0));
        }
        // Phi^T v = vec(S^T V T) restricted to the pairs.
        let core = s.transpose() * shifted * t;
        let rhs = DVector::from_iterator(self.width(), self.basis.pairs.iter().map(|&(i, j)| core[(i, j)]));
        let sts = s.transpose() * s;
        let ttt = t.transpose() * t;
        let pairs = &self.basis.pairs;
        let gram = DMatrix::from_fn(self.width(), self.width(), |p, q| sts[(pairs[p].0, pairs[q].0)] * ttt[(pairs[p].1, pairs[q].1)]);
        let ch = gram.cholesky().ok_or(RomError::Config("space-time basis is rank deficient".into()))?;
        Ok(ch.solve(&rhs))
    }

    /// Stacked residual for every step.
    pub fn residual(&self, x: &DVector<f64>) -> Result<DVector<f64>, RomError> {
        let ns = self.u0.len();
        let y = spatial_coefficients(&self.basis, x);
        let states = self.states(x);
        let mut r = DVector::zeros(ns * self.basis.n_steps());
        for n in 0..self.basis.n_steps() {
            let mut dy = y.column(n).into_owned();
            if n > 0 {
                dy -= y.column(n - 1);
            }
            let f = self.model.velocity(&states.column(n).into_owned(), (n + 1) as f64 * self.dt, &self.mu)?;
            r.rows_mut(n * ns, ns).copy_from(&(&self.mass_spatial * dy - f * self.dt));
        }
        self.counters.lock().expect("counter lock").full_velocity += self.basis.n_steps();
        Ok(r)
    }

    /// Residual norm, `J^T J` and `J^T r` of the full residual, summed over steps.
    fn normal_equations(&self, x: &DVector<f64>, keep: bool) -> Result<(f64, DMatrix<f64>, DVector<f64>, Option<DVector<f64>>), RomError> {
        let ns = self.u0.len();
        let nt = self.basis.n_steps();
        let width = self.width();
        let y = spatial_coefficients(&self.basis, x);
        let states = self.states(x);
        let n_chunks = nt.div_ceil(STEP_CHUNK);
        let parts = self.exec.map_range(n_chunks, |c| -> Result<_, RomError> {
            let mut normal = DMatrix::zeros(width, width);
            let mut grad = DVector::zeros(width);
            let mut sq = 0.0;
            let mut block_r = Vec::new();
            for n in c * STEP_CHUNK..((c + 1) * STEP_CHUNK).min(nt) {
                let u = states.column(n).into_owned();
                let t = (n + 1) as f64 * self.dt;
                let f = self.model.velocity(&u, t, &self.mu)?;
                let js = self.model.jacobian(&u, t, &self.mu)?.mul_mat(&self.basis.spatial);
                let mut dy = y.column(n).into_owned();
                if n > 0 {
                    dy -= y.column(n - 1);
                }
                let r = &self.mass_spatial * dy - f * self.dt;
                let mut jb = DMatrix::zeros(ns, width);
                for (p, &(i, j)) in self.basis.pairs.iter().enumerate() {
                    let a = self.diff_temporal[(n, j)];
                    let b = -self.dt * self.basis.temporal[(n, j)];
                    let mut col = jb.column_mut(p);
                    col.axpy(a, &self.mass_spatial.column(i), 0.0);
                    col.axpy(b, &js.column(i), 1.0);
                }
                let jt = jb.transpose();
                normal += &jt * &jb;
                grad += jt * &r;
                sq += r.norm_squared();
                if keep {
                    block_r.push(r);
                }
            }
            Ok((normal, grad, sq, block_r))
        });
        let mut normal = DMatrix::zeros(width, width);
        let mut grad = DVector::zeros(width);
        let mut sq = 0.0;
        let mut full = keep.then(|| DVector::zeros(ns * nt));
        let mut n = 0;
        for part in parts {
            let (a, g, s, blocks) = part?;
            normal += a;
            grad += g;
            sq += s;
            for b in blocks {
                if let Some(full) = full.as_mut() {
                    full.rows_mut(n * ns, ns).copy_from(&b);
                }
                n += 1;
            }
        }
        let mut c = self.counters.lock().expect("counter lock");
        c.full_velocity += nt;
        c.full_jacobian += nt;
        Ok((sq.sqrt(), normal, grad, full))
    }

    /// Full-residual Gauss-Newton; with `record`, the residual at every iterate is kept.
    pub fn solve_lspg(&self, tol: &GaussNewtonTolerances, mut record: Option<&mut Vec<DVector<f64>>>) -> Result<StSolution, RomError> {
        let keep = record.is_some();
        let (x, iterations) = gauss_newton(self.width(), tol, |x| {
            let (norm, normal, grad, full) = self.normal_equations(x, keep)?;
            if let (Some(out), Some(r)) = (record.as_deref_mut(), full) {
                out.push(r);
            }
            Ok((norm, normal, grad))
        })?;
        Ok(StSolution { x, iterations, counters: self.counters() })
    }

    fn layout(&self, plan: &[usize]) -> Vec<StepRows> {
        let ns = self.u0.len();
        let mut by_step: std::collections::BTreeMap<usize, Vec<(usize, usize)>> = Default::default();
        for (pos, &k) in plan.iter().enumerate() {
            by_step.entry(k / ns).or_default().push((pos, k % ns));
        }
        by_step
            .into_iter()
            .map(|(step, rows)| {
                let spatial_rows: Vec<usize> = rows.iter().map(|&(_, s)| s).collect();
                let gather = stencil_union(self.model, &spatial_rows);
                StepRows { step, rows, spatial_rows, gather }
            })
            .collect()
    }

    /// Residual and Jacobian at the sampled rows.
    fn sampled_rows(&self, layout: &[StepRows], n_z: usize, x: &DVector<f64>) -> Result<(DVector<f64>, DMatrix<f64>), RomError> {
        let mut r = DVector::zeros(n_z);
        let mut jac = DMatrix::zeros(n_z, self.width());
        let mut scratch = DVector::zeros(self.u0.len());
        let s = &self.basis.spatial;
        let mut evaluated = 0;
        for block in layout {
            let n = block.step;
            let y = coefficients_at(&self.basis, x, n);
            let dy = if n > 0 { &y - coefficients_at(&self.basis, x, n - 1) } else { y.clone() };
            for &g in &block.gather {
                scratch[g] = self.u0[g] + s.row(g).dot(&y.transpose());
            }
            let t = (n + 1) as f64 * self.dt;
            let f = self.model.velocity_rows(&scratch, &block.spatial_rows, t, &self.mu)?;
            let sparse = self.model.jacobian_rows(&scratch, &block.spatial_rows, t, &self.mu)?;
            evaluated += block.rows.len();
            for (k, &(pos, row)) in block.rows.iter().enumerate() {
                r[pos] = self.mass_spatial.row(row).dot(&dy.transpose()) - self.dt * f[k];
                let mut js = DVector::zeros(s.ncols());
                for &(c, v) in &sparse[k] {
                    js.axpy(v, &s.row(c).transpose(), 1.0);
                }
                for (p, &(i, j)) in self.basis.pairs.iter().enumerate() {
                    jac[(pos, p)] = self.mass_spatial[(row, i)] * self.diff_temporal[(n, j)]
                        - self.dt * js[i] * self.basis.temporal[(n, j)];
                }
            }
        }
        let mut c = self.counters.lock().expect("counter lock");
        c.velocity_rows += evaluated;
        c.jacobian_rows += evaluated;
        Ok((r, jac))
    }

    /// Sampled residual at `x`, in plan order.
    pub fn sampled_residual(&self, plan: &[usize], x: &DVector<f64>) -> Result<DVector<f64>, RomError> {
        let layout = self.layout(plan);
        Ok(self.sampled_rows(&layout, plan.len(), x)?.0)
    }

    pub fn solve_sampled(&self, projector: &SpaceTimeProjector, tol: &GaussNewtonTolerances) -> Result<StSolution, RomError> {
        let plan = &projector.plan.indices;
        let layout = self.layout(plan);
        let w = &projector.pseudo_inverse;
        let (x, iterations) = gauss_newton(self.width(), tol, |x| {
            let (r, j) = self.sampled_rows(&layout, plan.len(), x)?;
            let wr = w * r;
            let a = w * j;
            let at = a.transpose();
            Ok((wr.norm(), &at * &a, at * wr))
        })?;
        Ok(StSolution { x, iterations, counters: self.counters() })
    }
}

const MAX_HALVINGS: usize = 10;

/// Gauss-Newton from zero on normal-equation data `(||r||, A^T A, A^T r)`.
fn gauss_newton<F>(n: usize, tol: &GaussNewtonTolerances, mut eval: F) -> Result<(DVector<f64>, usize), RomError>
where
    F: FnMut(&DVector<f64>) -> Result<(f64, DMatrix<f64>, DVector<f64>), RomError>,
{
    let mut x = DVector::zeros(n);
    let (mut norm, mut normal, mut grad) = eval(&x)?;
    let initial = norm;
    let mut iterations = 0;
    if initial == 0.0 {
        return Ok((x, 0));
    }
    loop {
        if iterations == tol.max_iterations {
            return Err(RomError::GaussNewton { step: 0, iterations, residual_norm: norm });
        }
        if grad.norm() <= tol.stationarity * normal.trace().max(0.0).sqrt() * norm {
            return Ok((x, iterations));
        }
        let mut delta = match normal.clone().cholesky() {
            Some(ch) => -ch.solve(&grad),
            None => -crate::linalg::pinv(&normal) * &grad,
        };
        let mut halvings = 0;
        loop {
            let trial = &x + &delta;
            if !trial.iter().all(|v| v.is_finite()) {
                return Err(RomError::NonFinite { step: 0 });
            }
            // Steps that leave the admissible states or grow the residual are shortened.
            match eval(&trial) {
                Ok((n_t, a_t, g_t)) if halvings == MAX_HALVINGS || n_t <= norm * (1.0 + 1e-10) => {
                    (x, norm, normal, grad) = (trial, n_t, a_t, g_t);
                    break;
                }
                Ok(_) | Err(RomError::Model(ModelError::NonPhysical { .. })) if halvings < MAX_HALVINGS => {
                    delta *= 0.5;
                    halvings += 1;
                }
                Err(e) => return Err(e),
                Ok(_) => unreachable!("accepted above"),
            }
        }
        iterations += 1;
        if delta.norm() <= tol.step_relative * (1.0 + x.norm()) || norm <= tol.reduction * initial {
            return Ok((x, iterations));
        }
    }
}
