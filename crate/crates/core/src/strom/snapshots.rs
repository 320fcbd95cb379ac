//! Space-time residual snapshots for the baseline residual basis.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::SpaceTimeProblem;
use crate::compression::{CompressionError, SpaceTimeBasis};
use crate::fom::{ParameterPoint, SemiDiscreteModel};
use crate::integrators::{solve_fom, IntegrationOptions, Scheme, SchemeId};
use crate::par::Execution;
use crate::rom::GaussNewtonTolerances;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResidualSource {
    /// Residuals of the training trajectories' Newton iterates projected onto the basis.
    #[default]
    Projection,
    /// Residuals at every iterate of space-time LSPG training runs.
    StLspg,
}

fn reshape(r: &DVector<f64>, ns: usize, nt: usize) -> DMatrix<f64> {
    DMatrix::from_column_slice(ns, nt, r.as_slice())
}

/// `N_s x N_t` residual slices at the training points.
pub fn st_residual_snapshots(
    model: &dyn SemiDiscreteModel,
    basis: &SpaceTimeBasis,
    training: &[ParameterPoint],
    dt: f64,
    source: ResidualSource,
    tol: &GaussNewtonTolerances,
    exec: Execution,
) -> Result<Vec<DMatrix<f64>>, CompressionError> {
    let (ns, nt) = (basis.n_space(), basis.n_steps());
    let runs = exec.map(training, |mu| -> Result<Vec<DMatrix<f64>>, CompressionError> {
        let fail = |e: &dyn std::fmt::Display| CompressionError::Residual { param: mu.clone(), message: e.to_string() };
        let problem = SpaceTimeProblem::new(model, mu, basis, dt).map_err(|e| fail(&e))?;
        match source {
            ResidualSource::Projection => {
                let scheme = SchemeId::new(Scheme::BackwardEuler, dt, nt);
                let options = IntegrationOptions { record_iterates: true, ..Default::default() };
                let traj = solve_fom(model, mu, &scheme, &options)
                    .map_err(|source| CompressionError::Training { param: mu.clone(), source })?;
                let depth = traj.iterates.iter().map(Vec::len).max().unwrap_or(0);
                (0..depth)
                    .map(|k| {
                        // Steps that converged in fewer iterations contribute their converged state.
                        let states: Vec<DVector<f64>> = traj
                            .iterates
                            .iter()
                            .zip(&traj.states[1..])
                            .map(|(its, done)| its.get(k).unwrap_or(done).clone())
                            .collect();
                        let x = problem.project(&states).map_err(|e| fail(&e))?;
                        Ok(reshape(&problem.residual(&x).map_err(|e| fail(&e))?, ns, nt))
                    })
                    .collect()
            }
            ResidualSource::StLspg => {
                let mut recorded = Vec::new();
                problem.solve_lspg(tol, Some(&mut recorded)).map_err(|e| fail(&e))?;
                Ok(recorded.iter().map(|r| reshape(r, ns, nt)).collect())
            }
        }
    });
    let mut slices = Vec::new();
    for run in runs {
        slices.extend(run?);
    }
    Ok(slices)
}
