//! Nonlinear-term evaluation at `u0 + Phi x`, on all rows or on sampled rows only.

use std::sync::Mutex;

use nalgebra::{DMatrix, DVector};

use super::{EvalCounters, RomError};
use crate::compression::Basis;
use crate::fom::{stencil_union, ParameterPoint, SemiDiscreteModel};
use crate::hyper::select_rows;

enum Rows {
    All { basis: DMatrix<f64>, u0: DVector<f64> },
    Sampled {
        rows: Vec<usize>,
        /// Sorted state entries the sampled rows read.
        gather: Vec<usize>,
        basis: DMatrix<f64>,
        u0: DVector<f64>,
    },
}

/// Evaluates `Z^T f` and `Z^T J Phi` for generalized coordinates. The sampled
/// path writes only the gathered entries of a full-length scratch state.
pub struct RowEvaluator<'a> {
    model: &'a dyn SemiDiscreteModel,
    mu: ParameterPoint,
    rows: Rows,
    scratch: Mutex<DVector<f64>>,
    counters: Mutex<EvalCounters>,
}

impl<'a> RowEvaluator<'a> {
    pub fn full(model: &'a dyn SemiDiscreteModel, mu: &ParameterPoint, basis: &Basis) -> Result<Self, RomError> {
        let u0 = model.initial_state(mu)?;
        Ok(Self {
            model,
            mu: mu.clone(),
            rows: Rows::All { basis: basis.columns.clone(), u0 },
            scratch: Mutex::new(DVector::zeros(0)),
            counters: Mutex::default(),
        })
    }

    pub fn sampled(
        model: &'a dyn SemiDiscreteModel,
        mu: &ParameterPoint,
        basis: &Basis,
        rows: &[usize],
    ) -> Result<Self, RomError> {
        let u0_full = model.initial_state(mu)?;
        let gather = stencil_union(model, rows);
        let u0 = DVector::from_iterator(gather.len(), gather.iter().map(|&i| u0_full[i]));
        let mut scratch = DVector::zeros(model.n_space());
        for &i in &gather {
            scratch[i] = u0_full[i];
        }
        Ok(Self {
            model,
            mu: mu.clone(),
            rows: Rows::Sampled { rows: rows.to_vec(), basis: select_rows(&basis.columns, &gather), gather, u0 },
            scratch: Mutex::new(scratch),
            counters: Mutex::default(),
        })
    }

    pub fn model(&self) -> &dyn SemiDiscreteModel {
        self.model
    }

    pub fn mu(&self) -> &ParameterPoint {
        &self.mu
    }

    /// Number of rows returned by the evaluations.
    pub fn n_rows(&self) -> usize {
        match &self.rows {
            Rows::All { basis, .. } => basis.nrows(),
            Rows::Sampled { rows, .. } => rows.len(),
        }
    }

    /// Sampled row indices, `None` for the full path.
    pub fn sampled_rows(&self) -> Option<&[usize]> {
        match &self.rows {
            Rows::All { .. } => None,
            Rows::Sampled { rows, .. } => Some(rows),
        }
    }

    /// State entries touched per evaluation.
    pub fn gathered(&self) -> usize {
        match &self.rows {
            Rows::All { basis, .. } => basis.nrows(),
            Rows::Sampled { gather, .. } => gather.len(),
        }
    }

    pub fn counters(&self) -> EvalCounters {
        *self.counters.lock().expect("counter lock")
    }

    pub fn reset_counters(&self) {
        *self.counters.lock().expect("counter lock") = EvalCounters::default();
    }

    /// Full state `u0 + Phi x`; only available on the full path.
    pub fn full_state(&self, x: &DVector<f64>) -> Option<DVector<f64>> {
        match &self.rows {
            Rows::All { basis, u0 } => Some(u0 + basis * x),
            Rows::Sampled { .. } => None,
        }
    }

    pub fn velocity(&self, x: &DVector<f64>, t: f64) -> Result<DVector<f64>, RomError> {
        Ok(self.evaluate(x, t, false)?.0)
    }

    /// Sampled velocity and `Z^T J Phi`.
    pub fn velocity_and_jacobian(&self, x: &DVector<f64>, t: f64) -> Result<(DVector<f64>, DMatrix<f64>), RomError> {
        let (f, j) = self.evaluate(x, t, true)?;
        Ok((f, j.expect("jacobian requested")))
    }

    pub fn jacobian(&self, x: &DVector<f64>, t: f64) -> Result<DMatrix<f64>, RomError> {
        match &self.rows {
            Rows::All { basis, u0 } => {
                let u = u0 + basis * x;
                self.counters.lock().expect("counter lock").full_jacobian += 1;
                Ok(self.model.jacobian(&u, t, &self.mu)?.mul_mat(basis))
            }
            Rows::Sampled { rows, gather, basis, u0 } => {
                let mut scratch = self.scratch.lock().expect("scratch lock");
                scatter(&mut scratch, gather, &(u0 + basis * x));
                self.sampled_jacobian(&scratch, rows, gather, basis, t)
            }
        }
    }

    fn evaluate(&self, x: &DVector<f64>, t: f64, with_jacobian: bool) -> Result<(DVector<f64>, Option<DMatrix<f64>>), RomError> {
        match &self.rows {
            Rows::All { basis, u0 } => {
                let u = u0 + basis * x;
                let f = self.model.velocity(&u, t, &self.mu)?;
                let j = if with_jacobian { Some(self.model.jacobian(&u, t, &self.mu)?.mul_mat(basis)) } else { None };
                let mut c = self.counters.lock().expect("counter lock");
                c.full_velocity += 1;
                c.full_jacobian += usize::from(with_jacobian);
                Ok((f, j))
            }
            Rows::Sampled { rows, gather, basis, u0 } => {
                let mut scratch = self.scratch.lock().expect("scratch lock");
                scatter(&mut scratch, gather, &(u0 + basis * x));
                let f = self.model.velocity_rows(&scratch, rows, t, &self.mu)?;
                self.counters.lock().expect("counter lock").velocity_rows += rows.len();
                let j = if with_jacobian { Some(self.sampled_jacobian(&scratch, rows, gather, basis, t)?) } else { None };
                Ok((f, j))
            }
        }
    }

    fn sampled_jacobian(
        &self,
        u: &DVector<f64>,
        rows: &[usize],
        gather: &[usize],
        basis: &DMatrix<f64>,
        t: f64,
    ) -> Result<DMatrix<f64>, RomError> {
        let sparse = self.model.jacobian_rows(u, rows, t, &self.mu)?;
        self.counters.lock().expect("counter lock").jacobian_rows += rows.len();
        let mut entries = Vec::with_capacity(3 * rows.len());
        for (r, row) in sparse.iter().enumerate() {
            for &(col, value) in row {
                let pos = gather.binary_search(&col).map_err(|_| {
                    RomError::Config(format!("jacobian row {} reads state entry {col} outside its stencil", rows[r]))
                })?;
                entries.push((r, pos, value));
            }
        }
        let (nr, ng) = (rows.len(), basis.nrows());
        let mut out = DMatrix::zeros(nr, basis.ncols());
        for c in 0..basis.ncols() {
            let bc = &basis.as_slice()[c * ng..(c + 1) * ng];
            let oc = &mut out.as_mut_slice()[c * nr..(c + 1) * nr];
            for &(r, pos, value) in &entries {
                oc[r] += value * bc[pos];
            }
        }
        Ok(out)
    }
}

fn scatter(target: &mut DVector<f64>, indices: &[usize], values: &DVector<f64>) {
    for (&i, &v) in indices.iter().zip(values.iter()) {
        target[i] = v;
    }
}
