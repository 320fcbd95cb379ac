//! Linear-algebra building blocks shared by the full and reduced models.

mod band;
mod dense;

pub use band::{BandLu, BandMatrix};
pub use dense::{
    cond2, economy_qr, gram, left_singular, lstsq, numerical_rank, pinv, singular_values, thin_svd, Svd,
};

use nalgebra::linalg::LU;
use nalgebra::{DMatrix, DVector, Dyn};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is singular at pivot {pivot}")]
    Singular { pivot: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },
    #[error("least-squares operator has rank {rank} < {cols} columns")]
    RankDeficient { rank: usize, cols: usize },
}

/// Mass operator of a semi-discrete system, kept together with its factorization.
#[derive(Debug, Clone)]
pub enum MassOperator {
    Identity(usize),
    Banded { matrix: BandMatrix, factor: BandLu },
    Dense { matrix: DMatrix<f64>, factor: LU<f64, Dyn, Dyn> },
}

impl MassOperator {
    pub fn banded(matrix: BandMatrix) -> Result<Self, LinalgError> {
        let factor = matrix.lu()?;
        Ok(Self::Banded { matrix, factor })
    }

    pub fn dense(matrix: DMatrix<f64>) -> Result<Self, LinalgError> {
        let factor = matrix.clone().lu();
        if !factor.is_invertible() {
            return Err(LinalgError::Singular { pivot: 0 });
        }
        Ok(Self::Dense { matrix, factor })
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Identity(n) => *n,
            Self::Banded { matrix, .. } => matrix.dim(),
            Self::Dense { matrix, .. } => matrix.nrows(),
        }
    }

    pub fn is_identity(&self) -> bool {
        matches!(self, Self::Identity(_))
    }

    pub fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        match self {
            Self::Identity(_) => v.clone(),
            Self::Banded { matrix, .. } => matrix.mul_vec(v),
            Self::Dense { matrix, .. } => matrix * v,
        }
    }

    pub fn apply_mat(&self, v: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            Self::Identity(_) => v.clone(),
            Self::Banded { matrix, .. } => matrix.mul_mat(v),
            Self::Dense { matrix, .. } => matrix * v,
        }
    }

    pub fn solve(&self, v: &DVector<f64>) -> DVector<f64> {
        match self {
            Self::Identity(_) => v.clone(),
            Self::Banded { factor, .. } => factor.solve(v),
            Self::Dense { factor, .. } => factor.solve(v).expect("factorization checked at construction"),
        }
    }

    pub fn solve_mat(&self, v: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            Self::Identity(_) => v.clone(),
            Self::Banded { factor, .. } => factor.solve_mat(v),
            Self::Dense { factor, .. } => factor.solve(v).expect("factorization checked at construction"),
        }
    }

    /// Entries of row `i` as `(column, value)`.
    pub fn row(&self, i: usize) -> Vec<(usize, f64)> {
        match self {
            Self::Identity(_) => vec![(i, 1.0)],
            Self::Banded { matrix, .. } => matrix.row(i).filter(|(_, v)| *v != 0.0).collect(),
            Self::Dense { matrix, .. } => matrix.row(i).iter().copied().enumerate().collect(),
        }
    }

    /// Upper bound on the spectral norm (exact for the identity).
    pub fn norm_bound(&self) -> f64 {
        match self {
            Self::Identity(_) => 1.0,
            Self::Banded { matrix, .. } => matrix.norm_inf(),
            Self::Dense { matrix, .. } => singular_values(matrix).first().copied().unwrap_or(0.0),
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            Self::Identity(n) => DMatrix::identity(*n, *n),
            Self::Banded { matrix, .. } => matrix.to_dense(),
            Self::Dense { matrix, .. } => matrix.clone(),
        }
    }
}

/// Velocity Jacobian in whichever storage suits the system size.
#[derive(Debug, Clone)]
pub enum SystemMatrix {
    Banded(BandMatrix),
    Dense(DMatrix<f64>),
}

impl SystemMatrix {
    pub fn dim(&self) -> usize {
        match self {
            Self::Banded(m) => m.dim(),
            Self::Dense(m) => m.nrows(),
        }
    }

    pub fn mul_vec(&self, v: &DVector<f64>) -> DVector<f64> {
        match self {
            Self::Banded(m) => m.mul_vec(v),
            Self::Dense(m) => m * v,
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            Self::Banded(m) => m.to_dense(),
            Self::Dense(m) => m.clone(),
        }
    }

    /// `c_mass * M + c_jac * self`, banded whenever both operands are.
    pub fn with_mass(&self, mass: &MassOperator, c_mass: f64, c_jac: f64) -> SystemMatrix {
        match (self, mass) {
            (Self::Banded(j), MassOperator::Identity(n)) => {
                Self::Banded(BandMatrix::combine(c_mass, &BandMatrix::identity(*n), c_jac, j))
            }
            (Self::Banded(j), MassOperator::Banded { matrix, .. }) => {
                Self::Banded(BandMatrix::combine(c_mass, matrix, c_jac, j))
            }
            _ => {
                let mut m = self.to_dense() * c_jac;
                match mass {
                    MassOperator::Identity(n) => {
                        for i in 0..*n {
                            m[(i, i)] += c_mass;
                        }
                    }
                    other => m += other.to_dense() * c_mass,
                }
                Self::Dense(m)
            }
        }
    }

    pub fn factor(&self) -> Result<LinearSolver, LinalgError> {
        match self {
            Self::Banded(m) => Ok(LinearSolver::Banded(m.lu()?)),
            Self::Dense(m) => {
                let lu = m.clone().lu();
                if !lu.is_invertible() {
                    return Err(LinalgError::Singular { pivot: 0 });
                }
                Ok(LinearSolver::Dense(lu))
            }
        }
    }
}

/// A factorized square operator.
#[derive(Debug, Clone)]
pub enum LinearSolver {
    Banded(BandLu),
    Dense(LU<f64, Dyn, Dyn>),
}

impl LinearSolver {
    pub fn solve(&self, b: &DVector<f64>) -> Result<DVector<f64>, LinalgError> {
        match self {
            Self::Banded(lu) => Ok(lu.solve(b)),
            Self::Dense(lu) => lu.solve(b).ok_or(LinalgError::Singular { pivot: 0 }),
        }
    }
}
