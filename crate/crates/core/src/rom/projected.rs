//! Galerkin-type reduced systems `M_r dx/dt = E Z^T f(u0 + Phi x)`.

use nalgebra::{DMatrix, DVector};

use super::RowEvaluator;
use crate::fom::ModelError;
use crate::integrators::OdeSystem;
use crate::linalg::{MassOperator, SystemMatrix};

pub struct ProjectedSystem<'a> {
    eval: RowEvaluator<'a>,
    /// Maps sampled rows of `f` to reduced coordinates.
    left: DMatrix<f64>,
    mass: MassOperator,
}

impl<'a> ProjectedSystem<'a> {
    pub fn new(eval: RowEvaluator<'a>, left: DMatrix<f64>, mass: MassOperator) -> Self {
        Self { eval, left, mass }
    }

    pub fn evaluator(&self) -> &RowEvaluator<'a> {
        &self.eval
    }

    pub fn left(&self) -> &DMatrix<f64> {
        &self.left
    }
}

fn to_model_error(e: super::RomError) -> ModelError {
    match e {
        super::RomError::Model(m) => m,
        other => ModelError::Discretization(other.to_string()),
    }
}

impl OdeSystem for ProjectedSystem<'_> {
    fn dim(&self) -> usize {
        self.left.nrows()
    }

    fn mass(&self) -> &MassOperator {
        &self.mass
    }

    fn velocity(&self, x: &DVector<f64>, t: f64) -> Result<DVector<f64>, ModelError> {
        let f = self.eval.velocity(x, t).map_err(to_model_error)?;
        Ok(&self.left * f)
    }

    fn jacobian(&self, x: &DVector<f64>, t: f64) -> Result<SystemMatrix, ModelError> {
        let j = self.eval.jacobian(x, t).map_err(to_model_error)?;
        Ok(SystemMatrix::Dense(&self.left * j))
    }
}
