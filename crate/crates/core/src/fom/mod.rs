//! Full-order models `M du/dt = f(u, t; mu)` and the three benchmark problems.

mod burgers;
mod diffusion;
mod euler;

pub use burgers::{burgers_model, godunov_flux, BurgersModel};
pub use diffusion::{diffusion_model, DiffusionModel};
pub use euler::{
    euler_initial_state, euler_model, normal_shock, nozzle_area, nozzle_area_segment, roe_flux,
    AreaProfile, BoundaryData, EulerModel, GAMMA, GAS_CONSTANT, TOTAL_PRESSURE, TOTAL_TEMPERATURE,
};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{BandMatrix, LinalgError, MassOperator};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("expected {expected} parameters, got {found}")]
    ParamCount { expected: usize, found: usize },
    #[error("parameter {index} = {value} lies outside [{lower}, {upper}]")]
    OutOfDomain { index: usize, value: f64, lower: f64, upper: f64 },
    #[error("nonphysical state in cell {cell}: density {density}, pressure {pressure}")]
    NonPhysical { cell: usize, density: f64, pressure: f64 },
    #[error("position {x} outside the nozzle [0, 1]")]
    OutsideNozzle { x: f64 },
    #[error("area-Mach relation did not bracket a root at x = {x}")]
    MachRelation { x: f64 },
    #[error("shock jump quadratic has no real root (discriminant {discriminant})")]
    ShockQuadratic { discriminant: f64 },
    #[error("invalid discretization: {0}")]
    Discretization(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// A point in parameter space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(transparent)]
pub struct ParameterPoint(pub Vec<f64>);

impl ParameterPoint {
    pub fn new(values: impl Into<Vec<f64>>) -> Self {
        Self(values.into())
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl std::fmt::Display for ParameterPoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "(")?;
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, ")")
    }
}

/// Axis-aligned box of admissible parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamDomain {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl ParamDomain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Self {
        assert_eq!(lower.len(), upper.len());
        Self { lower, upper }
    }

    pub fn empty() -> Self {
        Self { lower: Vec::new(), upper: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn check(&self, mu: &ParameterPoint) -> Result<(), ModelError> {
        if mu.len() != self.dim() {
            return Err(ModelError::ParamCount { expected: self.dim(), found: mu.len() });
        }
        for (index, ((&value, &lower), &upper)) in mu.0.iter().zip(&self.lower).zip(&self.upper).enumerate() {
            if !(lower..=upper).contains(&value) {
                return Err(ModelError::OutOfDomain { index, value, lower, upper });
            }
        }
        Ok(())
    }
}

/// Sparse Jacobian rows as `(column, value)` lists.
pub type SparseRows = Vec<Vec<(usize, f64)>>;

/// The full-order model contract.
///
/// `velocity_rows` and `jacobian_rows` must read only the entries of `u` named
/// by [`SemiDiscreteModel::stencil`] for the requested rows, so callers can pass
/// a scratch vector in which only those entries are current.
pub trait SemiDiscreteModel: Send + Sync {
    fn name(&self) -> &str;
    fn n_space(&self) -> usize;
    fn param_domain(&self) -> &ParamDomain;
    fn mass(&self) -> &MassOperator;
    fn initial_state(&self, mu: &ParameterPoint) -> Result<DVector<f64>, ModelError>;
    fn velocity(&self, u: &DVector<f64>, t: f64, mu: &ParameterPoint) -> Result<DVector<f64>, ModelError>;
    fn jacobian(&self, u: &DVector<f64>, t: f64, mu: &ParameterPoint) -> Result<BandMatrix, ModelError>;
    /// State entries read by velocity row `row`, sorted ascending.
    fn stencil(&self, row: usize) -> Vec<usize>;
    fn velocity_rows(
        &self,
        u: &DVector<f64>,
        rows: &[usize],
        t: f64,
        mu: &ParameterPoint,
    ) -> Result<DVector<f64>, ModelError>;
    fn jacobian_rows(&self, u: &DVector<f64>, rows: &[usize], t: f64, mu: &ParameterPoint)
        -> Result<SparseRows, ModelError>;
}

/// Sorted union of the stencils of `rows`.
pub fn stencil_union(model: &dyn SemiDiscreteModel, rows: &[usize]) -> Vec<usize> {
    let mut all: Vec<usize> = rows.iter().flat_map(|&r| model.stencil(r)).collect();
    all.sort_unstable();
    all.dedup();
    all
}
