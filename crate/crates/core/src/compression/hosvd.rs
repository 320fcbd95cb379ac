//! Sequentially truncated HOSVD of a space x time x parameter snapshot tensor.

use nalgebra::{DMatrix, DVector};

use super::{fix_signs, CompressionError};
use crate::linalg::left_singular;
use crate::par::Execution;

/// Kronecker-factored space-time basis. Column `p` is
/// `temporal[:, pairs[p].1] (x) spatial[:, pairs[p].0]`, stacked time-major
/// (index `n * N_s + i`).
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeBasis {
    pub spatial: DMatrix<f64>,
    pub temporal: DMatrix<f64>,
    pub pairs: Vec<(usize, usize)>,
    pub spatial_sv: Vec<f64>,
    pub temporal_sv: Vec<f64>,
}

impl SpaceTimeBasis {
    pub fn n_space(&self) -> usize {
        self.spatial.nrows()
    }

    pub fn n_steps(&self) -> usize {
        self.temporal.nrows()
    }

    pub fn width(&self) -> usize {
        self.pairs.len()
    }

    /// The same factors keeping only the first `n` pairs.
    pub fn truncated(&self, n: usize) -> SpaceTimeBasis {
        SpaceTimeBasis { pairs: self.pairs[..n].to_vec(), ..self.clone() }
    }

    pub fn column(&self, p: usize) -> DVector<f64> {
        let (a, b) = self.pairs[p];
        let ns = self.n_space();
        DVector::from_fn(ns * self.n_steps(), |k, _| self.temporal[(k / ns, b)] * self.spatial[(k % ns, a)])
    }

    pub fn materialize(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n_space() * self.n_steps(), self.width());
        for p in 0..self.width() {
            m.set_column(p, &self.column(p));
        }
        m
    }
}

/// Spatial factor from the mode-1 unfolding, temporal factor from the mode-2
/// unfolding of the spatially compressed tensor, and the `n_st` index pairs
/// with the largest singular-value products.
pub fn st_hosvd(
    slices: &[DMatrix<f64>],
    n_s: usize,
    n_t: usize,
    n_st: usize,
    exec: Execution,
) -> Result<SpaceTimeBasis, CompressionError> {
    let first = slices.first().ok_or(CompressionError::Empty)?;
    let (ns, nt) = first.shape();
    if n_st > n_s * n_t || n_st == 0 {
        return Err(CompressionError::Rank { requested: n_st, rank: n_s * n_t });
    }
    let mut mode1 = DMatrix::zeros(ns, nt * slices.len());
    for (k, s) in slices.iter().enumerate() {
        mode1.columns_mut(k * nt, nt).copy_from(s);
    }
    let svd1 = left_singular(&mode1, exec);
    if n_s > svd1.rank() {
        return Err(CompressionError::Rank { requested: n_s, rank: svd1.rank() });
    }
    let mut spatial = svd1.u.columns(0, n_s).into_owned();
    fix_signs(&mut spatial);
    let mut mode2 = DMatrix::zeros(nt, n_s * slices.len());
    for (k, s) in slices.iter().enumerate() {
        let core = spatial.transpose() * s;
        mode2.columns_mut(k * n_s, n_s).copy_from(&core.transpose());
    }
    let svd2 = left_singular(&mode2, exec);
    if n_t > svd2.rank() {
        return Err(CompressionError::Rank { requested: n_t, rank: svd2.rank() });
    }
    let mut temporal = svd2.u.columns(0, n_t).into_owned();
    fix_signs(&mut temporal);
    let mut pairs: Vec<(usize, usize)> = (0..n_s).flat_map(|a| (0..n_t).map(move |b| (a, b))).collect();
    let weight = |&(a, b): &(usize, usize)| svd1.sigma[a] * svd2.sigma[b];
    pairs.sort_by(|x, y| weight(y).total_cmp(&weight(x)).then(x.cmp(y)));
    pairs.truncate(n_st);
    Ok(SpaceTimeBasis {
        spatial,
        temporal,
        pairs,
        spatial_sv: svd1.sigma[..svd1.sigma.len().min(ns)].to_vec(),
        temporal_sv: svd2.sigma[..svd2.sigma.len().min(nt)].to_vec(),
    })
}
