//! Greedy and pivoted-QR selection of sample rows.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{select_rows, HyperError};
use crate::linalg::{lstsq, pinv};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingMethod {
    DeimGreedy,
    GnatGreedy,
    QrPivot,
}

/// Selected rows, in selection order (0-based).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SamplingPlan {
    pub indices: Vec<usize>,
    pub method: SamplingMethod,
}

impl SamplingPlan {
    pub fn n_z(&self) -> usize {
        self.indices.len()
    }

    /// Every row of an `n`-row basis.
    pub fn all_rows(n: usize) -> Self {
        Self { indices: (0..n).collect(), method: SamplingMethod::GnatGreedy }
    }
}

/// First index of the largest `|v_i|` among rows not in `taken`.
fn argmax_abs(v: &DVector<f64>, taken: &[bool]) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, x) in v.iter().enumerate() {
        if taken[i] {
            continue;
        }
        if best.is_none_or(|(_, b)| x.abs() > b) {
            best = Some((i, x.abs()));
        }
    }
    best
}

/// Residual of fitting column `j` by the first `j` columns on `rows`.
fn fit_residual(basis: &DMatrix<f64>, rows: &[usize], j: usize) -> Result<DVector<f64>, HyperError> {
    let target = basis.column(j).into_owned();
    if j == 0 {
        return Ok(target);
    }
    let lead = basis.columns(0, j);
    let sampled = select_rows(&lead.into_owned(), rows);
    let rhs = DVector::from_iterator(rows.len(), rows.iter().map(|&r| target[r]));
    let coef = match lstsq(&sampled, &rhs) {
        Ok(c) => c,
        Err(_) => pinv(&sampled) * rhs,
    };
    Ok(target - lead * coef)
}

/// Interpolation greedy: one row per basis column.
pub fn deim_sampling(basis: &DMatrix<f64>) -> Result<SamplingPlan, HyperError> {
    let n = basis.ncols();
    let mut taken = vec![false; basis.nrows()];
    let mut indices = Vec::with_capacity(n);
    for k in 0..n {
        let r = fit_residual(basis, &indices, k)?;
        let (p, size) = argmax_abs(&r, &taken).ok_or(HyperError::RankCollapse { step: k })?;
        if size == 0.0 {
            return Err(HyperError::RankCollapse { step: k });
        }
        taken[p] = true;
        indices.push(p);
    }
    Ok(SamplingPlan { indices, method: SamplingMethod::DeimGreedy })
}

/// Gappy-POD greedy with oversampling: basis columns are revisited cyclically,
/// each pick taking the unsampled row where the least-squares reconstruction of
/// the current column from its predecessors errs most.
pub fn gnat_sampling(basis: &DMatrix<f64>, n_z: usize) -> Result<SamplingPlan, HyperError> {
    let (n_rows, n_r) = basis.shape();
    if n_z < n_r || n_z > n_rows {
        return Err(HyperError::SampleCount { n_z, min: n_r, max: n_rows });
    }
    let mut taken = vec![false; n_rows];
    let mut indices = Vec::with_capacity(n_z);
    for k in 0..n_z {
        let j = k % n_r;
        let r = fit_residual(basis, &indices, j)?;
        let (p, _) = argmax_abs(&r, &taken).ok_or(HyperError::RankCollapse { step: k })?;
        taken[p] = true;
        indices.push(p);
    }
    Ok(SamplingPlan { indices, method: SamplingMethod::GnatGreedy })
}

/// Column-pivoted Householder QR of `basis^T`; rows beyond the basis width
/// are filled by largest row norm.
pub fn qr_pivot_sampling(basis: &DMatrix<f64>, n_z: usize) -> Result<SamplingPlan, HyperError> {
    let (n_rows, n) = basis.shape();
    if n_z == 0 || n_z > n_rows {
        return Err(HyperError::SampleCount { n_z, min: 1, max: n_rows });
    }
    let mut a = basis.transpose();
    let mut perm: Vec<usize> = (0..n_rows).collect();
    let steps = n.min(n_z);
    for k in 0..steps {
        let mut best = k;
        let mut best_norm = -1.0;
        for c in k..n_rows {
            let norm = a.view((k, c), (n - k, 1)).norm_squared();
            if norm > best_norm || (norm == best_norm && perm[c] < perm[best]) {
                best_norm = norm;
                best = c;
            }
        }
        if best_norm <= 0.0 {
            return Err(HyperError::RankCollapse { step: k });
        }
        a.swap_columns(k, best);
        perm.swap(k, best);
        let mut v = a.view((k, k), (n - k, 1)).into_owned();
        let alpha = -v[0].signum() * v.norm();
        v[0] -= alpha;
        let vnorm2 = v.norm_squared();
        if vnorm2 > 0.0 {
            let mut tail = a.view_mut((k, k), (n - k, n_rows - k));
            let w = tail.tr_mul(&v) * (2.0 / vnorm2);
            tail -= &v * w.transpose();
        }
    }
    let mut indices: Vec<usize> = perm[..steps].to_vec();
    if n_z > steps {
        let mut taken = vec![false; n_rows];
        for &i in &indices {
            taken[i] = true;
        }
        let norms = DVector::from_fn(n_rows, |i, _| basis.row(i).norm());
        while indices.len() < n_z {
            let (p, _) = argmax_abs(&norms, &taken).ok_or(HyperError::RankCollapse { step: indices.len() })?;
            taken[p] = true;
            indices.push(p);
        }
    }
    Ok(SamplingPlan { indices, method: SamplingMethod::QrPivot })
}

/// Dispatches on `method`; DEIM ignores `n_z` beyond checking it.
pub fn sample(basis: &DMatrix<f64>, method: SamplingMethod, n_z: usize) -> Result<SamplingPlan, HyperError> {
    match method {
        SamplingMethod::DeimGreedy => {
            if n_z != basis.ncols() {
                return Err(HyperError::SampleCount { n_z, min: basis.ncols(), max: basis.ncols() });
            }
            deim_sampling(basis)
        }
        SamplingMethod::GnatGreedy => gnat_sampling(basis, n_z),
        SamplingMethod::QrPivot => qr_pivot_sampling(basis, n_z),
    }
}
