//! Row sampling and oblique projectors `P = Phi (Z^T Phi)^+ Z^T`.

mod projector;
mod sampling;

pub use projector::{build_projector, factor_sampled, orthogonalized_projector, projection_error_bound, BoundReport, ObliqueProjector};
pub use sampling::{deim_sampling, gnat_sampling, qr_pivot_sampling, sample, SamplingMethod, SamplingPlan};

use nalgebra::DMatrix;
use thiserror::Error;

use crate::compression::Basis;
use crate::linalg::{LinalgError, MassOperator};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HyperError {
    #[error("greedy residual vanished at step {step}: basis is rank deficient on the sampled rows")]
    RankCollapse { step: usize },
    #[error("sample count {n_z} outside [{min}, {max}]")]
    SampleCount { n_z: usize, min: usize, max: usize },
    #[error("sampled basis has condition number {kappa:.3e} (limit 1e12)")]
    IllConditioned { kappa: f64 },
    #[error("plan has {n_z} rows, basis has width {width}")]
    TooFewSamples { n_z: usize, width: usize },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// `M Phi`, flagged non-orthonormal unless `M` is the identity.
pub fn sns_basis(solution: &Basis, mass: &MassOperator) -> Basis {
    if mass.is_identity() {
        return solution.clone();
    }
    Basis { columns: mass.apply_mat(&solution.columns), singular_values: solution.singular_values.clone(), orthonormal: false }
}

/// Rows `rows` of `m`.
pub fn select_rows(m: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), m.ncols(), |r, c| m[(rows[r], c)])
}
