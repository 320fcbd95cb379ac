//! CSV tables and the run manifest.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{BenchError, ExperimentConfig, ExperimentReport};

pub const ERRORS_HEADER: [&str; 6] = ["method", "scheme", "n_s", "n_basis", "n_z", "relative_error"];
pub const OFFLINE_HEADER: [&str; 8] =
    ["method", "n_basis", "total_s", "fom_s", "residual_s", "compression_s", "sampling_s", "compression_count"];

/// One parsed line of `errors.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRecord {
    pub method: String,
    pub scheme: String,
    pub n_s: usize,
    pub n_basis: usize,
    pub n_z: usize,
    pub relative_error: f64,
}

#[derive(Serialize)]
struct Manifest<'a> {
    name: &'a str,
    seed: u64,
    package: &'static str,
    version: &'static str,
    parallel: bool,
    threads: usize,
    rows: usize,
    failed_rows: usize,
    failures: Vec<String>,
    config: &'a ExperimentConfig,
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>, BenchError> {
    Ok(csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(path)?)
}

fn threads() -> usize {
    #[cfg(feature = "parallel")]
    return rayon::current_num_threads();
    #[cfg(not(feature = "parallel"))]
    1
}

/// Writes `errors.csv`, `offline.csv` and `manifest.toml` into `dir`.
pub fn emit_report(report: &ExperimentReport, config: &ExperimentConfig, dir: &Path) -> Result<(), BenchError> {
    fs::create_dir_all(dir)?;
    let mut errors = writer(&dir.join("errors.csv"))?;
    errors.write_record(ERRORS_HEADER)?;
    for r in &report.rows {
        errors.write_record([
            r.method.clone(),
            r.scheme.clone(),
            r.n_s.to_string(),
            r.n_basis.to_string(),
            r.n_z.to_string(),
            format!("{:e}", r.relative_error),
        ])?;
    }
    errors.flush()?;
    let mut offline = writer(&dir.join("offline.csv"))?;
    offline.write_record(OFFLINE_HEADER)?;
    for r in &report.rows {
        offline.write_record([
            r.method.clone(),
            r.n_basis.to_string(),
            format!("{:.6}", r.offline_seconds()),
            format!("{:.6}", r.offline.fom_s),
            format!("{:.6}", r.offline.residual_s),
            format!("{:.6}", r.offline.compression_s),
            format!("{:.6}", r.offline.sampling_s),
            r.compression_count.to_string(),
        ])?;
    }
    offline.flush()?;
    let manifest = Manifest {
        name: &report.name,
        seed: report.seed,
        package: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        parallel: cfg!(feature = "parallel"),
        threads: threads(),
        rows: report.rows.len(),
        failed_rows: report.failures().count(),
        failures: report
            .failures()
            .map(|r| format!("{} {} n_basis={}: {}", r.method, r.scheme, r.n_basis, r.failure.as_deref().unwrap_or("")))
            .collect(),
        config,
    };
    let text = toml::to_string(&manifest).map_err(|e| BenchError::Config(e.to_string()))?;
    fs::write(dir.join("manifest.toml"), text)?;
    Ok(())
}

pub fn read_errors_csv(path: &Path) -> Result<Vec<ErrorRecord>, BenchError> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    if headers.iter().ne(ERRORS_HEADER) {
        return Err(BenchError::Config(format!("unexpected errors.csv header {headers:?}")));
    }
    Ok(reader.deserialize().collect::<Result<_, _>>()?)
}
