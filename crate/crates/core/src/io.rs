//! Binary matrix container and CSV exports.
//!
//! The container is a header of little-endian `u64` words (magic, version,
//! kind, rows, cols) followed by the column-major `f64` payload.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use thiserror::Error;

use crate::hyper::{SamplingMethod, SamplingPlan};

/// `b"SNSROM\0\x01"` read as a little-endian word.
pub const MAGIC: u64 = u64::from_le_bytes(*b"SNSROM\0\x01");
pub const VERSION: u64 = 1;

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("not a matrix container (magic {0:#018x})")]
    Magic(u64),
    #[error("unsupported container version {0}")]
    Version(u64),
    #[error("unknown content kind {0}")]
    Kind(u64),
    #[error("payload holds {found} values, header promises {expected}")]
    Truncated { expected: usize, found: usize },
    #[error("bad sampling plan line {line}: {message}")]
    Plan { line: usize, message: String },
}

/// What a stored matrix holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContentKind {
    SolutionSnapshots,
    NonlinearSnapshots,
    ResidualSnapshots,
    SpaceTimeSnapshots,
    Basis,
    Trajectory,
}

impl ContentKind {
    const ALL: [ContentKind; 6] = [
        ContentKind::SolutionSnapshots,
        ContentKind::NonlinearSnapshots,
        ContentKind::ResidualSnapshots,
        ContentKind::SpaceTimeSnapshots,
        ContentKind::Basis,
        ContentKind::Trajectory,
    ];

    pub fn code(self) -> u64 {
        Self::ALL.iter().position(|&k| k == self).expect("listed") as u64 + 1
    }

    pub fn from_code(code: u64) -> Result<Self, IoError> {
        code.checked_sub(1)
            .and_then(|i| Self::ALL.get(i as usize).copied())
            .ok_or(IoError::Kind(code))
    }
}

pub fn write_matrix<W: Write>(mut w: W, kind: ContentKind, m: &DMatrix<f64>) -> Result<(), IoError> {
    for word in [MAGIC, VERSION, kind.code(), m.nrows() as u64, m.ncols() as u64] {
        w.write_all(&word.to_le_bytes())?;
    }
    let mut payload = Vec::with_capacity(m.len() * 8);
    for v in m.as_slice() {
        payload.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&payload)?;
    Ok(())
}

pub fn read_matrix<R: Read>(mut r: R) -> Result<(ContentKind, DMatrix<f64>), IoError> {
    let mut header = [0u8; 40];
    r.read_exact(&mut header)?;
    let word = |i: usize| u64::from_le_bytes(header[8 * i..8 * i + 8].try_into().expect("8 bytes"));
    if word(0) != MAGIC {
        return Err(IoError::Magic(word(0)));
    }
    if word(1) != VERSION {
        return Err(IoError::Version(word(1)));
    }
    let kind = ContentKind::from_code(word(2))?;
    let (rows, cols) = (word(3) as usize, word(4) as usize);
    let mut payload = Vec::new();
    r.read_to_end(&mut payload)?;
    let expected = rows * cols;
    if payload.len() != expected * 8 {
        return Err(IoError::Truncated { expected, found: payload.len() / 8 });
    }
    let values: Vec<f64> =
        payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
    Ok((kind, DMatrix::from_vec(rows, cols, values)))
}

pub fn save_matrix(path: &Path, kind: ContentKind, m: &DMatrix<f64>) -> Result<(), IoError> {
    let file = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_matrix(file, kind, m)
}

pub fn load_matrix(path: &Path) -> Result<(ContentKind, DMatrix<f64>), IoError> {
    read_matrix(std::io::BufReader::new(std::fs::File::open(path)?))
}

fn csv_writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w)
}

/// One row per matrix row, columns `c0, c1, ...`.
pub fn write_matrix_csv<W: Write>(w: W, m: &DMatrix<f64>) -> Result<(), IoError> {
    let mut out = csv_writer(w);
    out.write_record((0..m.ncols()).map(|c| format!("c{c}")))?;
    for row in m.row_iter() {
        out.write_record(row.iter().map(|v| format!("{v:e}")))?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_matrix_csv<R: Read>(r: R) -> Result<DMatrix<f64>, IoError> {
    let mut reader = csv::Reader::from_reader(r);
    let cols = reader.headers()?.len();
    let mut values = Vec::new();
    let mut rows = 0;
    for record in reader.records() {
        let record = record?;
        for field in record.iter() {
            values.push(field.parse::<f64>().map_err(|e| IoError::Plan { line: rows + 2, message: e.to_string() })?);
        }
        rows += 1;
    }
    Ok(DMatrix::from_row_slice(rows, cols, &values))
}

/// Header `index`, then one 0-based row index per line in selection order.
pub fn write_plan_csv<W: Write>(w: W, plan: &SamplingPlan) -> Result<(), IoError> {
    let mut out = csv_writer(w);
    out.write_record(["index"])?;
    for i in &plan.indices {
        out.write_record([i.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_plan_csv<R: Read>(r: R, method: SamplingMethod) -> Result<SamplingPlan, IoError> {
    let mut reader = csv::Reader::from_reader(r);
    let mut indices = Vec::new();
    for (k, record) in reader.records().enumerate() {
        let record = record?;
        let field = record.get(0).unwrap_or("");
        let idx = field.trim().parse::<usize>().map_err(|e| IoError::Plan { line: k + 2, message: e.to_string() })?;
        if indices.contains(&idx) {
            return Err(IoError::Plan { line: k + 2, message: format!("duplicate index {idx}") });
        }
        indices.push(idx);
    }
    Ok(SamplingPlan { indices, method })
}
