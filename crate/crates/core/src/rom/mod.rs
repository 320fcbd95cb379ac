//! Online spatial reduced-order models.

mod evaluator;
mod least_squares;
mod projected;

pub use evaluator::RowEvaluator;
pub use least_squares::{GaussNewtonTolerances, LeastSquaresRom, RecordedResidual};
pub use projected::ProjectedSystem;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::compression::Basis;
use crate::fom::{ModelError, ParameterPoint, SemiDiscreteModel};
use crate::hyper::{HyperError, ObliqueProjector};
use crate::integrators::{integrate, IntegrationOptions, IntegratorError, OdeSystem, SchemeId};
use crate::linalg::{LinalgError, MassOperator};

#[derive(Debug, Error, Clone)]
pub enum RomError {
    #[error(transparent)]
    Integrator(#[from] IntegratorError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Hyper(#[from] HyperError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("Gauss-Newton did not converge at step {step} after {iterations} iterations (residual {residual_norm:.3e})")]
    GaussNewton { step: usize, iterations: usize, residual_norm: f64 },
    #[error("non-finite reduced state at step {step}")]
    NonFinite { step: usize },
    #[error("invalid reduced model: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RomMethod {
    Galerkin,
    Deim,
    DeimSns,
    Lspg,
    Gnat,
    GnatSns,
}

impl RomMethod {
    pub const ALL: [RomMethod; 6] =
        [RomMethod::Galerkin, RomMethod::Deim, RomMethod::DeimSns, RomMethod::Lspg, RomMethod::Gnat, RomMethod::GnatSns];

    pub fn name(self) -> &'static str {
        match self {
            RomMethod::Galerkin => "galerkin",
            RomMethod::Deim => "deim",
            RomMethod::DeimSns => "deim_sns",
            RomMethod::Lspg => "lspg",
            RomMethod::Gnat => "gnat",
            RomMethod::GnatSns => "gnat_sns",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name() == name)
    }

    /// Builds its hyper-reduction basis from the solution basis.
    pub fn is_sns(self) -> bool {
        matches!(self, RomMethod::DeimSns | RomMethod::GnatSns)
    }

    pub fn is_hyper_reduced(self) -> bool {
        matches!(self, RomMethod::Deim | RomMethod::DeimSns | RomMethod::Gnat | RomMethod::GnatSns)
    }

    pub fn is_least_squares(self) -> bool {
        matches!(self, RomMethod::Lspg | RomMethod::Gnat | RomMethod::GnatSns)
    }
}

impl std::fmt::Display for RomMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Which solution basis the SNS hyper-reduction basis is built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SnsVariant {
    /// `M Phi`.
    #[default]
    Equal,
    /// `M Phi_e` with `Phi_e` the extended basis.
    Extended,
}

/// Model evaluations performed during an online solve.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EvalCounters {
    /// Velocity rows evaluated through the sampled path.
    pub velocity_rows: usize,
    /// Full-length velocity evaluations.
    pub full_velocity: usize,
    pub jacobian_rows: usize,
    pub full_jacobian: usize,
}

#[derive(Debug, Clone)]
pub struct RomTrajectory {
    /// `n_s x (N_t + 1)` generalized coordinates, first column zero.
    pub generalized: DMatrix<f64>,
    /// Nonlinear-solver iterations per step.
    pub newton_counts: Vec<usize>,
    pub counters: EvalCounters,
}

impl RomTrajectory {
    pub fn lift(&self, basis: &Basis, u0: &DVector<f64>) -> DMatrix<f64> {
        lift(basis, &self.generalized, u0)
    }
}

/// `u0 + Phi x` for every column `x` of `generalized`.
pub fn lift(basis: &Basis, generalized: &DMatrix<f64>, u0: &DVector<f64>) -> DMatrix<f64> {
    let mut out = &basis.columns * generalized;
    for mut col in out.column_iter_mut() {
        col += u0;
    }
    out
}

/// A reduced model ready to march in time.
pub enum SpatialRom<'a> {
    Projected(ProjectedSystem<'a>),
    LeastSquares(LeastSquaresRom<'a>),
}

impl SpatialRom<'_> {
    pub fn solve(&self, scheme: &SchemeId) -> Result<RomTrajectory, RomError> {
        match self {
            SpatialRom::Projected(sys) => {
                let n = sys.dim();
                let traj = integrate(sys, scheme, DVector::zeros(n), &IntegrationOptions::default())?;
                let mut generalized = DMatrix::zeros(n, traj.states.len());
                for (c, s) in traj.states.iter().enumerate() {
                    generalized.set_column(c, s);
                }
                Ok(RomTrajectory { generalized, newton_counts: traj.newton_iterations, counters: sys.evaluator().counters() })
            }
            SpatialRom::LeastSquares(rom) => rom.solve(scheme, false).map(|(t, _)| t),
        }
    }

    pub fn evaluator(&self) -> &RowEvaluator<'_> {
        match self {
            SpatialRom::Projected(sys) => sys.evaluator(),
            SpatialRom::LeastSquares(rom) => rom.evaluator(),
        }
    }
}

fn reduced_mass(basis: &Basis, mass: &MassOperator) -> Result<MassOperator, RomError> {
    if mass.is_identity() && basis.orthonormal {
        return Ok(MassOperator::Identity(basis.width()));
    }
    let m = basis.columns.tr_mul(&mass.apply_mat(&basis.columns));
    Ok(MassOperator::dense(m)?)
}

fn reject_weighted(projector: &ObliqueProjector) -> Result<(), RomError> {
    if projector.weight.is_some() {
        return Err(RomError::Config("weighted projectors need full-length evaluations and are not supported online".into()));
    }
    Ok(())
}

/// `Phi^T M Phi du/dt = Phi^T f(u0 + Phi u)`.
pub fn galerkin<'a>(model: &'a dyn SemiDiscreteModel, mu: &ParameterPoint, basis: &Basis) -> Result<SpatialRom<'a>, RomError> {
    let eval = RowEvaluator::full(model, mu, basis)?;
    let mass = reduced_mass(basis, model.mass())?;
    Ok(SpatialRom::Projected(ProjectedSystem::new(eval, basis.columns.transpose(), mass)))
}

/// Galerkin with `f` replaced by its interpolant in the nonlinear-term basis.
pub fn deim<'a>(
    model: &'a dyn SemiDiscreteModel,
    mu: &ParameterPoint,
    basis: &Basis,
    projector: &ObliqueProjector,
) -> Result<SpatialRom<'a>, RomError> {
    reject_weighted(projector)?;
    let eval = RowEvaluator::sampled(model, mu, basis, &projector.plan.indices)?;
    let left = basis.columns.tr_mul(&projector.basis.columns) * &projector.pseudo_inverse;
    let mass = reduced_mass(basis, model.mass())?;
    Ok(SpatialRom::Projected(ProjectedSystem::new(eval, left, mass)))
}

/// Galerkin with the nonlinear term interpolated in `M Phi` (or `M Phi_e`),
/// which cancels the reduced mass matrix.
pub fn deim_sns<'a>(
    model: &'a dyn SemiDiscreteModel,
    mu: &ParameterPoint,
    basis: &Basis,
    projector: &ObliqueProjector,
) -> Result<SpatialRom<'a>, RomError> {
    reject_weighted(projector)?;
    let n = basis.width();
    let eval = RowEvaluator::sampled(model, mu, basis, &projector.plan.indices)?;
    let sns = crate::hyper::sns_basis(basis, model.mass());
    let width = projector.basis.width();
    let head = projector.basis.columns.columns(0, n.min(width));
    let left = if width >= n && head == sns.columns.columns(0, n) {
        // Nonlinear basis is [M Phi, M Phi_E]: the left factor is [I, (Phi^T M Phi)^{-1} Phi^T M Phi_E].
        let mut factor = DMatrix::zeros(n, width);
        factor.view_mut((0, 0), (n, n)).fill_with_identity();
        if width > n {
            let tail = projector.basis.columns.columns(n, width - n);
            let coupling = basis.columns.tr_mul(&tail);
            let solved = reduced_mass(basis, model.mass())?.solve_mat(&coupling);
            factor.view_mut((0, n), (n, width - n)).copy_from(&solved);
        }
        factor * &projector.pseudo_inverse
    } else {
        let coupling = basis.columns.tr_mul(&projector.basis.columns) * &projector.pseudo_inverse;
        reduced_mass(basis, model.mass())?.solve_mat(&coupling)
    };
    Ok(SpatialRom::Projected(ProjectedSystem::new(eval, left, MassOperator::Identity(n))))
}

/// Residual minimization over the trial subspace at every step.
pub fn lspg<'a>(model: &'a dyn SemiDiscreteModel, mu: &ParameterPoint, basis: &Basis) -> Result<SpatialRom<'a>, RomError> {
    Ok(SpatialRom::LeastSquares(LeastSquaresRom::lspg(model, mu, basis)?))
}

/// Minimizes the gappy reconstruction coefficients of the residual in `projector`'s basis.
pub fn gnat<'a>(
    model: &'a dyn SemiDiscreteModel,
    mu: &ParameterPoint,
    basis: &Basis,
    projector: &ObliqueProjector,
) -> Result<SpatialRom<'a>, RomError> {
    reject_weighted(projector)?;
    Ok(SpatialRom::LeastSquares(LeastSquaresRom::sampled(model, mu, basis, projector)?))
}

/// GNAT whose residual basis is `M Phi` (or `M Phi_e`).
pub fn gnat_sns<'a>(
    model: &'a dyn SemiDiscreteModel,
    mu: &ParameterPoint,
    basis: &Basis,
    projector: &ObliqueProjector,
) -> Result<SpatialRom<'a>, RomError> {
    gnat(model, mu, basis, projector)
}

