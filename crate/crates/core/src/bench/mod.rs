//! Experiment harness: configuration, presets, sweeps, error metric and reports.

mod config;
mod report;
mod run;
pub mod verify;

pub use config::{
    ExperimentConfig, ProblemConfig, ProblemKind, SpaceTimeConfig, SpatialConfig, StMethod, Sweep, TimeConfig,
    TrainingConfig,
};
pub use report::{emit_report, read_errors_csv, ErrorRecord, ERRORS_HEADER, OFFLINE_HEADER};
pub use run::{run_experiment, run_experiment_with};

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::compression::CompressionError;
use crate::fom::ModelError;
use crate::integrators::IntegratorError;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("unknown preset {0:?}")]
    UnknownPreset(String),
    #[error("reference trajectory is identically zero")]
    ZeroReference,
    #[error("trajectory shapes differ: {approx:?} vs {reference:?}")]
    Shape { approx: (usize, usize), reference: (usize, usize) },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Integrator(#[from] IntegratorError),
    #[error(transparent)]
    Compression(#[from] CompressionError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

const PRESETS: [(&str, &str); 6] = [
    ("diffusion", include_str!("../../presets/diffusion.toml")),
    ("burgers", include_str!("../../presets/burgers.toml")),
    ("burgers_st", include_str!("../../presets/burgers_st.toml")),
    ("euler", include_str!("../../presets/euler.toml")),
    ("euler_st", include_str!("../../presets/euler_st.toml")),
    ("smoke", include_str!("../../presets/smoke.toml")),
];

pub fn preset_names() -> Vec<&'static str> {
    PRESETS.iter().map(|(n, _)| *n).collect()
}

pub fn preset(name: &str) -> Result<ExperimentConfig, BenchError> {
    let (_, text) = PRESETS.iter().find(|(n, _)| *n == name).ok_or_else(|| BenchError::UnknownPreset(name.into()))?;
    ExperimentConfig::from_toml(text)
}

/// `sqrt(sum_n |approx_n - reference_n|^2) / sqrt(sum_n |reference_n|^2)` over
/// columns `1..`, skipping the shared initial state.
pub fn relative_error(approx: &DMatrix<f64>, reference: &DMatrix<f64>) -> Result<f64, BenchError> {
    if approx.shape() != reference.shape() {
        return Err(BenchError::Shape { approx: approx.shape(), reference: reference.shape() });
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for n in 1..reference.ncols() {
        num += (approx.column(n) - reference.column(n)).norm_squared();
        den += reference.column(n).norm_squared();
    }
    if den == 0.0 {
        return Err(BenchError::ZeroReference);
    }
    Ok((num / den).sqrt())
}

/// States as the columns of one matrix.
pub fn trajectory_matrix(states: &[DVector<f64>]) -> DMatrix<f64> {
    let rows = states.first().map_or(0, |s| s.len());
    let mut m = DMatrix::zeros(rows, states.len());
    for (c, s) in states.iter().enumerate() {
        m.set_column(c, s);
    }
    m
}

/// Wall time of each offline phase, in seconds.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct OfflineBreakdown {
    /// Full-order training runs.
    pub fom_s: f64,
    /// Collection of nonlinear-term or residual snapshots.
    pub residual_s: f64,
    /// Decompositions and basis assembly.
    pub compression_s: f64,
    /// Sample selection and projector factorization.
    pub sampling_s: f64,
}

impl OfflineBreakdown {
    pub fn total(&self) -> f64 {
        self.fom_s + self.residual_s + self.compression_s + self.sampling_s
    }
}

/// One method at one set of widths.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub method: String,
    pub scheme: String,
    pub n_s: usize,
    pub n_basis: usize,
    pub n_z: usize,
    /// NaN when the row failed.
    pub relative_error: f64,
    pub offline: OfflineBreakdown,
    /// Matrix or tensor decompositions in the offline phase.
    pub compression_count: usize,
    /// Training simulations run only to collect residual snapshots.
    pub residual_simulations: usize,
    pub online_s: f64,
    pub newton_total: usize,
    pub failure: Option<String>,
}

impl ReportRow {
    pub fn offline_seconds(&self) -> f64 {
        self.offline.total()
    }

    pub fn failed(&self) -> bool {
        self.failure.is_some()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExperimentReport {
    pub name: String,
    pub seed: u64,
    pub rows: Vec<ReportRow>,
}

impl ExperimentReport {
    pub fn failures(&self) -> impl Iterator<Item = &ReportRow> {
        self.rows.iter().filter(|r| r.failed())
    }

    pub fn rows_for<'a>(&'a self, method: &'a str, scheme: &'a str) -> impl Iterator<Item = &'a ReportRow> {
        self.rows.iter().filter(move |r| r.method == method && r.scheme == scheme)
    }
}
