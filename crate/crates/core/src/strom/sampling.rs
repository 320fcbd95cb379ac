//! Greedy selection of space-time rows and the sampled residual projector.

use nalgebra::{DMatrix, DVector};

use crate::compression::SpaceTimeBasis;
use crate::hyper::{factor_sampled, HyperError, SamplingMethod, SamplingPlan};
use crate::linalg::lstsq;

/// Gappy projector of a space-time residual basis on sampled rows (index `n * N_s + s`).
#[derive(Debug, Clone)]
pub struct SpaceTimeProjector {
    pub basis: SpaceTimeBasis,
    pub plan: SamplingPlan,
    pub sampled: DMatrix<f64>,
    pub pseudo_inverse: DMatrix<f64>,
    pub kappa: f64,
}

fn entry(basis: &SpaceTimeBasis, row: usize, p: usize) -> f64 {
    let ns = basis.n_space();
    let (i, j) = basis.pairs[p];
    basis.spatial[(row % ns, i)] * basis.temporal[(row / ns, j)]
}

fn sampled_rows(basis: &SpaceTimeBasis, rows: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), basis.width(), |r, p| entry(basis, rows[r], p))
}

fn fit(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let at = a.transpose();
    match (&at * a).cholesky() {
        Some(ch) => ch.solve(&(at * b)),
        None => lstsq(a, b).unwrap_or_else(|_| crate::linalg::pinv(a) * b),
    }
}

/// Cyclic gappy-POD greedy over space-time rows. Pick `k` is restricted to
/// time block `k mod n_blocks` (contiguous step ranges), spreading the samples
/// over the time window.
pub fn st_sampling(basis: &SpaceTimeBasis, n_z: usize, n_blocks: usize) -> Result<SamplingPlan, HyperError> {
    let (ns, nt, n_r) = (basis.n_space(), basis.n_steps(), basis.width());
    let total = ns * nt;
    if n_z < n_r || n_z > total {
        return Err(HyperError::SampleCount { n_z, min: n_r, max: total });
    }
    let n_blocks = n_blocks.clamp(1, nt);
    let bounds: Vec<(usize, usize)> = (0..n_blocks).map(|b| (b * nt / n_blocks, (b + 1) * nt / n_blocks)).collect();
    let mut taken = vec![false; total];
    let mut indices: Vec<usize> = Vec::with_capacity(n_z);
    let mut chosen = DMatrix::zeros(n_z, n_r);
    let mut k = 0;
    let mut block = 0;
    while indices.len() < n_z {
        let j = k % n_r;
        let (start, end) = bounds[block % n_blocks];
        block += 1;
        let free = (start * ns..end * ns).any(|r| !taken[r]);
        if !free {
            if block > n_blocks * (n_z + 1) {
                return Err(HyperError::RankCollapse { step: k });
            }
            continue;
        }
        // Reconstruction coefficients of column j from columns < j on chosen rows.
        let mut coef = DMatrix::zeros(basis.spatial.ncols(), basis.temporal.ncols());
        let (ij, jj) = basis.pairs[j];
        coef[(ij, jj)] = 1.0;
        if j > 0 {
            let m = indices.len();
            let a = chosen.view((0, 0), (m, j)).into_owned();
            let b = chosen.view((0, j), (m, 1)).column(0).into_owned();
            let c = fit(&a, &b);
            for (q, &(i, t)) in basis.pairs[..j].iter().enumerate() {
                coef[(i, t)] -= c[q];
            }
        }
        let t_block = basis.temporal.rows(start, end - start);
        let err = &basis.spatial * (coef * t_block.transpose());
        let mut best: Option<(usize, f64)> = None;
        for (local_n, col) in err.column_iter().enumerate() {
            for (s, v) in col.iter().enumerate() {
                let row = (start + local_n) * ns + s;
                if taken[row] {
                    continue;
                }
                if best.is_none_or(|(_, b)| v.abs() > b) {
                    best = Some((row, v.abs()));
                }
            }
        }
        let (row, _) = best.expect("block has a free row");
        taken[row] = true;
        let pos = indices.len();
        for p in 0..n_r {
            chosen[(pos, p)] = entry(basis, row, p);
        }
        indices.push(row);
        k += 1;
    }
    Ok(SamplingPlan { indices, method: SamplingMethod::GnatGreedy })
}

/// Samples `n_z` rows with [`st_sampling`] and factors the sampled basis.
pub fn st_projector(basis: &SpaceTimeBasis, n_z: usize, n_blocks: usize) -> Result<SpaceTimeProjector, HyperError> {
    let plan = st_sampling(basis, n_z, n_blocks)?;
    SpaceTimeProjector::new(basis, plan)
}

impl SpaceTimeProjector {
    pub fn new(basis: &SpaceTimeBasis, plan: SamplingPlan) -> Result<Self, HyperError> {
        let sampled = sampled_rows(basis, &plan.indices);
        let (pseudo_inverse, kappa) = factor_sampled(&sampled)?;
        Ok(Self { basis: basis.clone(), plan, sampled, pseudo_inverse, kappa })
    }
}
