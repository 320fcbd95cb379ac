//! Residual snapshots from LSPG runs at the training points.

use super::{stack_columns, CompressionError, Provenance, SnapshotKind, SnapshotSet};
use crate::compression::Basis;
use crate::fom::{ParameterPoint, SemiDiscreteModel};
use crate::integrators::SchemeId;
use crate::par::Execution;
use crate::rom::{LeastSquaresRom, RecordedResidual};

/// Runs LSPG without hyper-reduction at every training point and keeps the
/// full residual at every Gauss-Newton iterate (the start and the update for
/// explicit stages).
pub fn collect_residual_snapshots(
    model: &dyn SemiDiscreteModel,
    scheme: &SchemeId,
    basis: &Basis,
    training: &[ParameterPoint],
    exec: Execution,
) -> Result<SnapshotSet, CompressionError> {
    let runs: Vec<Vec<RecordedResidual>> = exec
        .map(training, |mu| {
            let fail = |e: &dyn std::fmt::Display| CompressionError::Residual { param: mu.clone(), message: e.to_string() };
            let rom = LeastSquaresRom::lspg(model, mu, basis).map_err(|e| fail(&e))?;
            rom.solve(scheme, true).map(|(_, r)| r).map_err(|e| fail(&e))
        })
        .into_iter()
        .collect::<Result<_, _>>()?;
    let mut cols = Vec::new();
    let mut provenance = Vec::new();
    for (p, run) in runs.iter().enumerate() {
        for r in run {
            cols.push(&r.value);
            provenance.push(Provenance { param: p, step: r.step, half: false, newton: Some(r.iteration) });
        }
    }
    Ok(SnapshotSet {
        kind: SnapshotKind::Residual,
        matrix: stack_columns(&cols, model.n_space()),
        provenance,
        params: training.to_vec(),
        offsets: Vec::new(),
    })
}
