//! Snapshot collection and basis construction.

mod hosvd;
mod residual;

pub use hosvd::{st_hosvd, SpaceTimeBasis};
pub use residual::collect_residual_snapshots;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fom::{ParameterPoint, SemiDiscreteModel};
use crate::integrators::{solve_fom, IntegrationOptions, IntegratorError, Scheme, SchemeId, Trajectory};
use crate::linalg::{left_singular, Svd};
use crate::par::Execution;

#[derive(Debug, Error, Clone)]
pub enum CompressionError {
    #[error("training run at {param} failed: {source}")]
    Training { param: ParameterPoint, source: IntegratorError },
    #[error("requested {requested} basis vectors but the snapshots have numerical rank {rank}")]
    Rank { requested: usize, rank: usize },
    #[error("extended width {n_ext} must exceed the base width {n}")]
    Extension { n: usize, n_ext: usize },
    #[error("snapshot set is empty")]
    Empty,
    #[error("residual collection failed at {param}: {message}")]
    Residual { param: ParameterPoint, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SnapshotKind {
    Solution,
    NonlinearTerm,
    Residual,
    SpaceTimeSolution,
}

/// Where a snapshot column came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Provenance {
    /// Index into [`SnapshotSet::params`].
    pub param: usize,
    pub step: usize,
    /// Runge-Kutta midpoint of step `step + 1`.
    pub half: bool,
    pub newton: Option<usize>,
}

/// Snapshot columns with their origin.
#[derive(Debug, Clone)]
pub struct SnapshotSet {
    pub kind: SnapshotKind,
    pub matrix: DMatrix<f64>,
    pub provenance: Vec<Provenance>,
    pub params: Vec<ParameterPoint>,
    /// Initial state of each training run; subtracted before compression.
    pub offsets: Vec<DVector<f64>>,
}

impl SnapshotSet {
    pub fn n_cols(&self) -> usize {
        self.matrix.ncols()
    }

    /// Columns minus their trajectory's initial state (a copy of the raw
    /// matrix when there are no offsets).
    pub fn centered(&self) -> DMatrix<f64> {
        let mut m = self.matrix.clone();
        if !self.offsets.is_empty() {
            for (c, p) in self.provenance.iter().enumerate() {
                let mut col = m.column_mut(c);
                col -= &self.offsets[p.param];
            }
        }
        m
    }
}

/// Orthonormal (or flagged) basis columns with the spectrum they came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Basis {
    pub columns: DMatrix<f64>,
    pub singular_values: Vec<f64>,
    pub orthonormal: bool,
}

impl Basis {
    pub fn new(columns: DMatrix<f64>, orthonormal: bool) -> Self {
        Self { columns, singular_values: Vec::new(), orthonormal }
    }

    pub fn n_rows(&self) -> usize {
        self.columns.nrows()
    }

    pub fn width(&self) -> usize {
        self.columns.ncols()
    }

    /// First `n` columns.
    pub fn leading(&self, n: usize) -> Basis {
        Basis { columns: self.columns.columns(0, n).into_owned(), singular_values: self.singular_values.clone(), orthonormal: self.orthonormal }
    }
}

/// Flips each column so that its largest-magnitude entry (first on ties) is positive.
pub fn fix_signs(m: &mut DMatrix<f64>) {
    for mut col in m.column_iter_mut() {
        let mut best = 0;
        for (i, v) in col.iter().enumerate() {
            if v.abs() > col[best].abs() {
                best = i;
            }
        }
        if col[best] < 0.0 {
            col.neg_mut();
        }
    }
}

/// One SVD of a snapshot set, truncated on demand.
#[derive(Debug, Clone)]
pub struct Pod {
    svd: Svd,
}

impl Pod {
    pub fn compute(snapshots: &SnapshotSet, exec: Execution) -> Result<Self, CompressionError> {
        if snapshots.n_cols() == 0 {
            return Err(CompressionError::Empty);
        }
        if snapshots.kind == SnapshotKind::Solution {
            Ok(Self::from_matrix(&snapshots.centered(), exec))
        } else {
            Ok(Self::from_matrix(&snapshots.matrix, exec))
        }
    }

    pub fn from_matrix(data: &DMatrix<f64>, exec: Execution) -> Self {
        let mut svd = left_singular(data, exec);
        fix_signs(&mut svd.u);
        Self { svd }
    }

    pub fn rank(&self) -> usize {
        self.svd.rank()
    }

    pub fn singular_values(&self) -> &[f64] {
        &self.svd.sigma
    }

    pub fn basis(&self, n: usize) -> Result<Basis, CompressionError> {
        let rank = self.rank();
        if n == 0 || n > rank {
            return Err(CompressionError::Rank { requested: n, rank });
        }
        Ok(Basis { columns: self.svd.u.columns(0, n).into_owned(), singular_values: self.svd.sigma.clone(), orthonormal: true })
    }

    /// Leading `n` left singular vectors, past the numerical rank if asked;
    /// fails only when `n` exceeds the vectors available.
    pub fn leading(&self, n: usize) -> Result<Basis, CompressionError> {
        let available = self.svd.u.ncols();
        if n == 0 || n > available {
            return Err(CompressionError::Rank { requested: n, rank: available });
        }
        Ok(Basis { columns: self.svd.u.columns(0, n).into_owned(), singular_values: self.svd.sigma.clone(), orthonormal: true })
    }

    /// `(Phi, Phi_e)` with `Phi` the first `n` columns of `Phi_e`.
    pub fn extended(&self, n: usize, n_ext: usize) -> Result<(Basis, Basis), CompressionError> {
        if n_ext <= n {
            return Err(CompressionError::Extension { n, n_ext });
        }
        let ext = self.basis(n_ext)?;
        Ok((ext.leading(n), ext))
    }
}

pub fn pod(snapshots: &SnapshotSet, n: usize) -> Result<Basis, CompressionError> {
    Pod::compute(snapshots, Execution::default())?.basis(n)
}

pub fn extended_pod(snapshots: &SnapshotSet, n: usize, n_ext: usize) -> Result<(Basis, Basis), CompressionError> {
    Pod::compute(snapshots, Execution::default())?.extended(n, n_ext)
}

/// Full-order runs at every training point, in training order.
pub fn run_training(
    model: &dyn SemiDiscreteModel,
    scheme: &SchemeId,
    training: &[ParameterPoint],
    options: &IntegrationOptions,
    exec: Execution,
) -> Result<Vec<Trajectory>, CompressionError> {
    exec.map(training, |mu| {
        solve_fom(model, mu, scheme, options).map_err(|source| CompressionError::Training { param: mu.clone(), source })
    })
    .into_iter()
    .collect()
}

/// `u^0..u^{N_t}` of every run, with Runge-Kutta midpoints interleaved.
pub fn solution_snapshots(runs: &[Trajectory], params: &[ParameterPoint], scheme: Scheme) -> SnapshotSet {
    let mut cols: Vec<&DVector<f64>> = Vec::new();
    let mut provenance = Vec::new();
    for (p, run) in runs.iter().enumerate() {
        for (step, state) in run.states.iter().enumerate() {
            cols.push(state);
            provenance.push(Provenance { param: p, step, half: false, newton: None });
            if scheme == Scheme::MidpointRk2 {
                if let Some(h) = run.half_states.get(step) {
                    cols.push(h);
                    provenance.push(Provenance { param: p, step, half: true, newton: None });
                }
            }
        }
    }
    SnapshotSet {
        kind: SnapshotKind::Solution,
        matrix: stack_columns(&cols, runs.first().map_or(0, |r| r.states[0].len())),
        provenance,
        params: params.to_vec(),
        offsets: runs.iter().map(|r| r.states[0].clone()).collect(),
    }
}

/// Velocity evaluations recorded during the runs.
pub fn nonlinear_snapshots(runs: &[Trajectory], params: &[ParameterPoint]) -> SnapshotSet {
    let mut cols = Vec::new();
    let mut provenance = Vec::new();
    for (p, run) in runs.iter().enumerate() {
        for v in &run.velocities {
            cols.push(&v.value);
            provenance.push(Provenance { param: p, step: v.step, half: v.half, newton: None });
        }
    }
    SnapshotSet {
        kind: SnapshotKind::NonlinearTerm,
        matrix: stack_columns(&cols, runs.first().map_or(0, |r| r.states[0].len())),
        provenance,
        params: params.to_vec(),
        offsets: Vec::new(),
    }
}

pub fn collect_solution_snapshots(
    model: &dyn SemiDiscreteModel,
    scheme: &SchemeId,
    training: &[ParameterPoint],
) -> Result<SnapshotSet, CompressionError> {
    let runs = run_training(model, scheme, training, &IntegrationOptions::default(), Execution::default())?;
    Ok(solution_snapshots(&runs, training, scheme.scheme))
}

pub(crate) fn stack_columns(cols: &[&DVector<f64>], n_rows: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n_rows, cols.len());
    for (c, v) in cols.iter().enumerate() {
        m.set_column(c, v);
    }
    m
}
