//! Dense factorizations: QR from nalgebra, SVD and symmetric eigenproblems from LAPACK.

use nalgebra::{DMatrix, DVector};
use ndarray::{Array2, ShapeBuilder};
use ndarray_linalg::{Eigh, JobSvd, SVDDC, UPLO};

use super::LinalgError;
use crate::par::Execution;

const GRAM_CHUNK: usize = 256;

/// Left singular vectors and singular values, sorted in decreasing order.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: DMatrix<f64>,
    pub sigma: Vec<f64>,
    /// Singular values at or below this are treated as zero.
    pub rank_tol: f64,
}

impl Svd {
    pub fn rank(&self) -> usize {
        self.sigma.iter().take_while(|&&s| s > self.rank_tol).count()
    }
}

/// `A A^T`, accumulated over column chunks in a fixed order so the result does
/// not depend on the execution mode.
pub fn gram(a: &DMatrix<f64>, exec: Execution) -> DMatrix<f64> {
    let n_chunks = a.ncols().div_ceil(GRAM_CHUNK);
    let parts = exec.map_range(n_chunks, |c| {
        let start = c * GRAM_CHUNK;
        let len = GRAM_CHUNK.min(a.ncols() - start);
        let block = a.columns(start, len);
        &block * block.transpose()
    });
    let mut g = DMatrix::zeros(a.nrows(), a.nrows());
    for p in parts {
        g += p;
    }
    g
}

/// Above this `m^2 n` a wide matrix goes through its Gram matrix instead of a
/// direct SVD.
const DIRECT_SVD_WORK: f64 = 5.0e10;

fn to_ndarray(a: &DMatrix<f64>) -> Array2<f64> {
    Array2::from_shape_vec((a.nrows(), a.ncols()).f(), a.as_slice().to_vec()).expect("shape matches storage")
}

fn from_ndarray(a: &Array2<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |r, c| a[[r, c]])
}

/// Economy SVD `a = U diag(sigma) V^T` through LAPACK's divide and conquer,
/// singular values in decreasing order.
pub fn thin_svd(a: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>, DMatrix<f64>) {
    let (m, n) = a.shape();
    let k = m.min(n);
    if k == 0 {
        return (DMatrix::zeros(m, 0), Vec::new(), DMatrix::zeros(0, n));
    }
    let (u, s, vt) = to_ndarray(a).svddc(JobSvd::Some).expect("LAPACK SVD converges");
    let u = u.expect("requested left vectors");
    let vt = vt.expect("requested right vectors");
    (from_ndarray(&u), s.to_vec(), from_ndarray(&vt))
}

/// Thin left SVD. Large wide matrices go through the eigendecomposition of
/// `A A^T`, which resolves singular values only down to `sqrt(eps) sigma_1`.
pub fn left_singular(a: &DMatrix<f64>, exec: Execution) -> Svd {
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return Svd { u: DMatrix::zeros(m, 0), sigma: Vec::new(), rank_tol: 0.0 };
    }
    if n > m && (m * m) as f64 * n as f64 > DIRECT_SVD_WORK {
        let (values, vectors) = to_ndarray(&gram(a, exec)).eigh(UPLO::Lower).expect("LAPACK eigensolver converges");
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&i, &j| values[j].total_cmp(&values[i]).then(i.cmp(&j)));
        let sigma: Vec<f64> = order.iter().map(|&i| values[i].max(0.0).sqrt()).collect();
        let u = DMatrix::from_fn(m, m, |r, c| vectors[[r, order[c]]]);
        let rank_tol = (m as f64 * f64::EPSILON).sqrt() * sigma[0];
        return Svd { u, sigma, rank_tol };
    }
    let (u, sigma, _) = thin_svd(a);
    let rank_tol = m.max(n) as f64 * f64::EPSILON * sigma[0];
    Svd { u, sigma, rank_tol }
}

pub fn singular_values(a: &DMatrix<f64>) -> Vec<f64> {
    if a.is_empty() {
        return Vec::new();
    }
    to_ndarray(a).svddc(JobSvd::None).expect("LAPACK SVD converges").1.to_vec()
}

pub fn numerical_rank(a: &DMatrix<f64>) -> usize {
    let s = singular_values(a);
    let Some(&top) = s.first() else { return 0 };
    let tol = a.nrows().max(a.ncols()) as f64 * f64::EPSILON * top;
    s.iter().filter(|&&v| v > tol).count()
}

/// 2-norm condition number; infinite for rank-deficient input.
pub fn cond2(a: &DMatrix<f64>) -> f64 {
    let s = singular_values(a);
    match (s.first(), s.get(a.nrows().min(a.ncols()).saturating_sub(1))) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        _ => f64::INFINITY,
    }
}

pub fn economy_qr(a: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let qr = a.clone().qr();
    (qr.q(), qr.r())
}

/// Minimizes `||a x - b||` for a full-column-rank `a` via Householder QR.
pub fn lstsq(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>, LinalgError> {
    if a.nrows() != b.len() {
        return Err(LinalgError::Dimension { expected: a.nrows(), found: b.len() });
    }
    if a.nrows() < a.ncols() {
        return Err(LinalgError::RankDeficient { rank: a.nrows(), cols: a.ncols() });
    }
    let qr = a.clone().qr();
    let r = qr.r();
    let scale = r.diagonal().iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let rank = r.diagonal().iter().filter(|v| v.abs() > 1e-13 * scale).count();
    if scale == 0.0 || rank < a.ncols() {
        return Err(LinalgError::RankDeficient { rank, cols: a.ncols() });
    }
    let mut rhs = b.clone();
    qr.q_tr_mul(&mut rhs);
    let top = rhs.rows(0, a.ncols()).into_owned();
    r.solve_upper_triangular(&top).ok_or(LinalgError::Singular { pivot: 0 })
}

/// Moore-Penrose pseudo-inverse with the usual relative cutoff.
pub fn pinv(a: &DMatrix<f64>) -> DMatrix<f64> {
    let (u, sigma, vt) = thin_svd(a);
    let top = sigma.first().copied().unwrap_or(0.0);
    let tol = a.nrows().max(a.ncols()) as f64 * f64::EPSILON * top;
    let mut scaled = vt.transpose();
    for (k, &s) in sigma.iter().enumerate() {
        let inv = if s > tol { 1.0 / s } else { 0.0 };
        scaled.column_mut(k).scale_mut(inv);
    }
    scaled * u.transpose()
}
