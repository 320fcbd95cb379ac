//! Space-time reduced models over the backward Euler block system.

mod problem;
mod sampling;
mod snapshots;

pub use problem::{SpaceTimeOperator, SpaceTimeProblem};
pub use sampling::{st_projector, st_sampling, SpaceTimeProjector};
pub use snapshots::{st_residual_snapshots, ResidualSource};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::compression::SpaceTimeBasis;
use crate::fom::{ParameterPoint, SemiDiscreteModel};
use crate::linalg::MassOperator;
use crate::rom::{EvalCounters, GaussNewtonTolerances, RomError};

/// Residual basis used by the SNS space-time model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StSnsVariant {
    /// `A Phi`, with `A` the block backward Euler operator.
    #[default]
    Operator,
    /// `A Phi_e`.
    OperatorExtended,
    /// `Phi` itself; identity mass only.
    Basis,
    /// `Phi_e`; identity mass only.
    BasisExtended,
}

impl StSnsVariant {
    pub fn is_extended(self) -> bool {
        matches!(self, StSnsVariant::OperatorExtended | StSnsVariant::BasisExtended)
    }

    /// The extended counterpart when the residual basis is wider than the solution basis.
    pub fn for_width(self, n_st: usize, n_r: usize) -> Self {
        match (self, n_r > n_st) {
            (StSnsVariant::Operator, true) => StSnsVariant::OperatorExtended,
            (StSnsVariant::Basis, true) => StSnsVariant::BasisExtended,
            (StSnsVariant::OperatorExtended, false) => StSnsVariant::Operator,
            (StSnsVariant::BasisExtended, false) => StSnsVariant::Basis,
            (v, _) => v,
        }
    }
}

/// Converged space-time coordinates.
#[derive(Debug, Clone)]
pub struct StSolution {
    pub x: DVector<f64>,
    pub iterations: usize,
    pub counters: EvalCounters,
}

/// Residual basis for the SNS model built from the (extended) solution basis,
/// whose first `n_st` pairs must be the solution basis.
pub fn st_sns_residual_basis(
    extended: &SpaceTimeBasis,
    n_st: usize,
    n_r: usize,
    variant: StSnsVariant,
    mass: &MassOperator,
) -> Result<SpaceTimeBasis, RomError> {
    let variant = variant.for_width(n_st, n_r);
    if n_r < n_st || n_r > extended.width() {
        return Err(RomError::Config(format!("residual width {n_r} outside [{n_st}, {}]", extended.width())));
    }
    let base = extended.truncated(n_r);
    match variant {
        StSnsVariant::Operator | StSnsVariant::OperatorExtended => {
            Ok(SpaceTimeOperator::new(mass.clone(), extended.n_steps()).apply_basis(&base))
        }
        StSnsVariant::Basis | StSnsVariant::BasisExtended => {
            if !mass.is_identity() {
                return Err(RomError::Config("the solution basis is a residual basis only for identity mass".into()));
            }
            Ok(base)
        }
    }
}

/// Gauss-Newton over the whole time window from `x = 0`, minimizing the full space-time residual.
pub fn st_lspg_solve(
    model: &dyn SemiDiscreteModel,
    basis: &SpaceTimeBasis,
    mu: &ParameterPoint,
    dt: f64,
    tol: &GaussNewtonTolerances,
) -> Result<StSolution, RomError> {
    let problem = SpaceTimeProblem::new(model, mu, basis, dt)?;
    problem.solve_lspg(tol, None)
}

/// Gauss-Newton on the gappy reconstruction of the space-time residual.
pub fn st_gnat_solve(
    model: &dyn SemiDiscreteModel,
    basis: &SpaceTimeBasis,
    projector: &SpaceTimeProjector,
    mu: &ParameterPoint,
    dt: f64,
    tol: &GaussNewtonTolerances,
) -> Result<StSolution, RomError> {
    let problem = SpaceTimeProblem::new(model, mu, basis, dt)?;
    problem.solve_sampled(projector, tol)
}

/// ST-GNAT whose residual basis comes from the solution basis; `projector`
/// must be built on [`st_sns_residual_basis`].
pub fn st_gnat_sns_solve(
    model: &dyn SemiDiscreteModel,
    basis: &SpaceTimeBasis,
    projector: &SpaceTimeProjector,
    mu: &ParameterPoint,
    dt: f64,
    tol: &GaussNewtonTolerances,
) -> Result<StSolution, RomError> {
    st_gnat_solve(model, basis, projector, mu, dt, tol)
}

/// `N_s x (N_t + 1)` trajectory `u0 + Phi x` with `u0` prepended.
pub fn lift_space_time(basis: &SpaceTimeBasis, x: &DVector<f64>, u0: &DVector<f64>) -> DMatrix<f64> {
    let y = problem::spatial_coefficients(basis, x);
    let mut out = DMatrix::zeros(u0.len(), basis.n_steps() + 1);
    out.set_column(0, u0);
    let states = &basis.spatial * y;
    for n in 0..basis.n_steps() {
        out.set_column(n + 1, &(u0 + states.column(n)));
    }
    out
}
