//! Oblique projectors and their error bounds.

use nalgebra::{DMatrix, DVector};

use super::{sample, select_rows, HyperError, SamplingPlan};
use crate::compression::Basis;
use crate::linalg::{economy_qr, singular_values, MassOperator};

const CONDITION_LIMIT: f64 = 1e12;

/// `P v = W Phi (Z^T Phi)^+ Z^T W^{-1} v`, with `W = I` when unweighted.
#[derive(Debug, Clone)]
pub struct ObliqueProjector {
    pub basis: Basis,
    pub plan: SamplingPlan,
    /// `Z^T Phi`.
    pub sampled: DMatrix<f64>,
    /// `(Z^T Phi)^+`, from the QR of `sampled`.
    pub pseudo_inverse: DMatrix<f64>,
    pub kappa: f64,
    pub weight: Option<MassOperator>,
}

impl ObliqueProjector {
    pub fn n_rows(&self) -> usize {
        self.basis.n_rows()
    }

    /// Coefficients `(Z^T Phi)^+ Z^T W^{-1} v`.
    pub fn coefficients(&self, v: &DVector<f64>) -> DVector<f64> {
        let scaled = match &self.weight {
            Some(m) => m.solve(v),
            None => v.clone(),
        };
        let picked = DVector::from_iterator(self.plan.n_z(), self.plan.indices.iter().map(|&i| scaled[i]));
        &self.pseudo_inverse * picked
    }

    pub fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        let out = &self.basis.columns * self.coefficients(v);
        match &self.weight {
            Some(m) => m.apply(&out),
            None => out,
        }
    }

    /// Dense matrix of the projector, for small problems and tests.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.n_rows();
        let mut p = DMatrix::zeros(n, n);
        for j in 0..n {
            let mut e = DVector::zeros(n);
            e[j] = 1.0;
            p.set_column(j, &self.apply(&e));
        }
        p
    }
}

/// Pseudo-inverse of a full-column-rank `a` through its economy QR, plus its
/// condition number; fails above the conditioning limit.
pub fn factor_sampled(a: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64), HyperError> {
    if a.nrows() < a.ncols() {
        return Err(HyperError::TooFewSamples { n_z: a.nrows(), width: a.ncols() });
    }
    let s = singular_values(a);
    let lo = s.last().copied().unwrap_or(0.0);
    let kappa = if lo > 0.0 { s[0] / lo } else { f64::INFINITY };
    if !(kappa <= CONDITION_LIMIT) {
        return Err(HyperError::IllConditioned { kappa });
    }
    let (q, r) = economy_qr(a);
    let pinv = r
        .solve_upper_triangular(&q.transpose())
        .ok_or(HyperError::IllConditioned { kappa: f64::INFINITY })?;
    Ok((pinv, kappa))
}

fn orthonormalize(basis: &Basis) -> Basis {
    let (q, _) = economy_qr(&basis.columns);
    Basis { columns: q, singular_values: basis.singular_values.clone(), orthonormal: true }
}

/// Builds the projector on `plan`; with `orthogonalize` the basis is replaced by
/// its QR factor and the plan is re-derived from it with the same method and size.
pub fn build_projector(
    basis: &Basis,
    plan: &SamplingPlan,
    orthogonalize: bool,
    weight: Option<&MassOperator>,
) -> Result<ObliqueProjector, HyperError> {
    let (basis, plan) = if orthogonalize {
        let q = orthonormalize(basis);
        let plan = sample(&q.columns, plan.method, plan.n_z())?;
        (q, plan)
    } else {
        (basis.clone(), plan.clone())
    };
    let sampled = select_rows(&basis.columns, &plan.indices);
    let (pseudo_inverse, kappa) = factor_sampled(&sampled)?;
    Ok(ObliqueProjector { basis, plan, sampled, pseudo_inverse, kappa, weight: weight.cloned() })
}

/// Orthogonalizes, samples from the orthonormal factor, and builds the projector.
pub fn orthogonalized_projector(
    basis: &Basis,
    method: super::SamplingMethod,
    n_z: usize,
    weight: Option<&MassOperator>,
) -> Result<ObliqueProjector, HyperError> {
    let q = orthonormalize(basis);
    let plan = sample(&q.columns, method, n_z)?;
    build_projector(&q, &plan, false, weight)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundReport {
    /// `||(I - P) v||`.
    pub lhs: f64,
    /// Bound on `lhs` from the orthogonal projection error.
    pub rhs: f64,
    /// Condition number of `Z^T Phi`.
    pub kappa: f64,
    /// `||(Z^T Q)^+||_2` for the orthonormal factor `Q` of the basis.
    pub amplification: f64,
}

/// Compares the oblique projection error against `||(Z^T Q)^+|| ||(I - Q Q^T) v||`
/// (scaled by `||M||` and taken on `M^{-1} v` for weighted projectors).
pub fn projection_error_bound(projector: &ObliqueProjector, v: &DVector<f64>) -> BoundReport {
    let lhs = (v - projector.apply(v)).norm();
    let (q, _) = economy_qr(&projector.basis.columns);
    let zq = select_rows(&q, &projector.plan.indices);
    let s = singular_values(&zq);
    let smin = s.get(q.ncols().saturating_sub(1)).copied().unwrap_or(0.0);
    let amplification = if smin > 0.0 { 1.0 / smin } else { f64::INFINITY };
    let (target, scale) = match &projector.weight {
        Some(m) => (m.solve(v), m.norm_bound()),
        None => (v.clone(), 1.0),
    };
    let orth = &target - &q * (q.tr_mul(&target));
    BoundReport { lhs, rhs: scale * amplification * orth.norm(), kappa: projector.kappa, amplification }
}
