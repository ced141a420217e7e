//! File formats and run manifests for the `spod` command-line tool.
//!
//! Matrices travel in a fixed binary format (`SPODM1`); shift trajectories
//! are plain-text files with one value per snapshot, expressed in grid
//! cells so they carry no unit convention. A JSON manifest captures every
//! solver-relevant setting of a run for exact replay.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use ndarray::{Array2, ArrayView2, ShapeBuilder};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MATRIX_MAGIC: &[u8; 6] = b"SPODM1";
pub const DTYPE_FLOAT64: u8 = 1;
pub const LAYOUT_COLUMN_MAJOR: u8 = 1;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("bad file format in {path}: {reason}")]
    Format { path: PathBuf, reason: String },
    #[error("{0}")]
    Usage(String),
}

pub type Result<T> = std::result::Result<T, CliError>;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Write `bytes` to `path` atomically: write to a temporary sibling file and
/// rename it into place.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let tmp = match dir {
        Some(d) => d.join(format!(
            ".{}.tmp",
            path.file_name().unwrap_or_default().to_string_lossy()
        )),
        None => PathBuf::from(format!(
            ".{}.tmp",
            path.file_name().unwrap_or_default().to_string_lossy()
        )),
    };
    {
        let mut f = fs::File::create(&tmp).map_err(io_err(&tmp))?;
        f.write_all(bytes).map_err(io_err(&tmp))?;
        f.sync_all().map_err(io_err(&tmp))?;
    }
    fs::rename(&tmp, path).map_err(io_err(path))
}

/// Serialize a matrix into the `SPODM1` binary layout: 6-byte magic, dtype
/// tag, layout tag, `M` and `N` as little-endian u64, then `8*M*N` bytes of
/// IEEE-754 binary64 values in column-major order.
pub fn matrix_to_bytes(matrix: ArrayView2<'_, f64>) -> Vec<u8> {
    let (m, n) = matrix.dim();
    let mut out = Vec::with_capacity(24 + 8 * m * n);
    out.extend_from_slice(MATRIX_MAGIC);
    out.push(DTYPE_FLOAT64);
    out.push(LAYOUT_COLUMN_MAJOR);
    out.extend_from_slice(&(m as u64).to_le_bytes());
    out.extend_from_slice(&(n as u64).to_le_bytes());
    for j in 0..n {
        for i in 0..m {
            out.extend_from_slice(&matrix[[i, j]].to_le_bytes());
        }
    }
    out
}

pub fn write_matrix(path: &Path, matrix: ArrayView2<'_, f64>) -> Result<()> {
    atomic_write(path, &matrix_to_bytes(matrix))
}

pub fn matrix_from_bytes(path: &Path, bytes: &[u8]) -> Result<Array2<f64>> {
    let format = |reason: &str| CliError::Format {
        path: path.to_path_buf(),
        reason: reason.into(),
    };
    if bytes.len() < 24 {
        return Err(format("file shorter than the 24-byte header"));
    }
    if &bytes[..6] != MATRIX_MAGIC {
        return Err(format("missing SPODM1 magic"));
    }
    if bytes[6] != DTYPE_FLOAT64 {
        return Err(format("unsupported dtype tag (expected float64)"));
    }
    if bytes[7] != LAYOUT_COLUMN_MAJOR {
        return Err(format("unsupported layout tag (expected column-major)"));
    }
    let m = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let n = u64::from_le_bytes(bytes[16..24].try_into().unwrap()) as usize;
    let expected = 24 + 8 * m * n;
    if bytes.len() != expected {
        return Err(format(&formatted_len(m, n, expected, bytes.len())));
    }
    let values: Vec<f64> = bytes[24..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Array2::from_shape_vec((m, n).f(), values)
        .map_err(|e| format(&format!("shape mismatch: {e}")))
}

fn formatted_len(m: usize, n: usize, expected: usize, got: usize) -> String {
    format!("payload length for a {m}x{n} matrix must be {expected} bytes, got {got}")
}

pub fn read_matrix(path: &Path) -> Result<Array2<f64>> {
    let mut bytes = Vec::new();
    fs::File::open(path)
        .map_err(io_err(path))?
        .read_to_end(&mut bytes)
        .map_err(io_err(path))?;
    matrix_from_bytes(path, &bytes)
}

/// Plain-text importer for small hand-made inputs: one row per line,
/// comma-separated values, every line the same length.
pub fn read_csv_matrix(path: &Path) -> Result<Array2<f64>> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let format = |reason: String| CliError::Format {
        path: path.to_path_buf(),
        reason,
    };
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: std::result::Result<Vec<f64>, _> =
            line.split(',').map(|cell| cell.trim().parse::<f64>()).collect();
        let row = row.map_err(|e| format(format!("line {}: {e}", lineno + 1)))?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(format(format!(
                    "line {} has {} values, expected {}",
                    lineno + 1,
                    row.len(),
                    first.len()
                )));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(format("no data rows".into()));
    }
    let (m, n) = (rows.len(), rows[0].len());
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    Array2::from_shape_vec((m, n), flat).map_err(|e| format(format!("shape mismatch: {e}")))
}

/// Load a matrix, choosing the reader by file extension (`.csv` for the
/// plain-text importer, anything else for the binary format).
pub fn load_matrix(path: &Path) -> Result<Array2<f64>> {
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        read_csv_matrix(path)
    } else {
        read_matrix(path)
    }
}

/// One shift value per snapshot, in grid cells, one per line.
pub fn write_shifts(path: &Path, shifts: &[f64]) -> Result<()> {
    let mut text = String::new();
    for s in shifts {
        // round-trippable float formatting
        text.push_str(&format!("{s:?}\n"));
    }
    atomic_write(path, text.as_bytes())
}

pub fn read_shifts(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut shifts = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        shifts.push(trimmed.parse::<f64>().map_err(|e| CliError::Format {
            path: path.to_path_buf(),
            reason: format!("line {}: {e}", lineno + 1),
        })?);
    }
    if shifts.is_empty() {
        return Err(CliError::Format {
            path: path.to_path_buf(),
            reason: "no shift values".into(),
        });
    }
    Ok(shifts)
}

/// Everything needed to replay a decomposition run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    /// Benchmark name when the inputs came from `generate`, otherwise the
    /// label used in reports.
    pub benchmark: String,
    pub input: PathBuf,
    pub shift_files: Vec<PathBuf>,
    pub method: String,
    pub lambdas: Vec<f64>,
    pub lambda_noise: f64,
    pub step_alpha: f64,
    pub mu: Option<f64>,
    pub delta_tol: f64,
    pub max_iter: usize,
    pub rank_rel_tol: f64,
    pub seed: u64,
    pub out_dir: PathBuf,
}

pub fn write_manifest(path: &Path, manifest: &RunManifest) -> Result<()> {
    let json = serde_json::to_string_pretty(manifest).expect("manifest serialization");
    atomic_write(path, json.as_bytes())
}

pub fn read_manifest(path: &Path) -> Result<RunManifest> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| CliError::Format {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

/// Summary of a finished run, one row of the comparison table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary {
    pub benchmark: String,
    pub method: String,
    pub relative_error: f64,
    pub ranks: Vec<usize>,
    pub iterations: usize,
    pub cpu_seconds: f64,
    pub converged: bool,
}

pub fn write_summary(path: &Path, summary: &RunSummary) -> Result<()> {
    let json = serde_json::to_string_pretty(summary).expect("summary serialization");
    atomic_write(path, json.as_bytes())
}

pub fn read_summary(path: &Path) -> Result<RunSummary> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| CliError::Format {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}
