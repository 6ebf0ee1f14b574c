//! JSON reports and CSV dumps.

use crate::pipeline::RunError;
use levicore::annulus::OracleResult;
use levicore::df_index::DefectPoint;
use serde::Serialize;
use std::path::{Path, PathBuf};

fn io(path: &Path, e: impl std::fmt::Display) -> RunError {
    RunError::Other(format!("{}: {e}", path.display()))
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String, RunError> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| RunError::Other(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

/// Writes pretty JSON to `out`, or to stdout.
pub fn emit<T: Serialize>(out: &Option<PathBuf>, value: &T) -> Result<(), RunError> {
    let text = to_json(value)?;
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| io(p, e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn write_csv<R: Serialize>(path: &Path, rows: impl IntoIterator<Item = R>) -> Result<(), RunError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    }
    let mut w = csv::Writer::from_path(path).map_err(|e| io(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| io(path, e))?;
    }
    w.flush().map_err(|e| io(path, e))
}

/// `defect_curve.csv` with columns `delta,defect`.
pub fn defect_csv(dir: &Path, curve: &[DefectPoint]) -> Result<(), RunError> {
    write_csv(&dir.join("defect_curve.csv"), curve.iter().copied())
}

#[derive(Serialize)]
struct ConvergenceRow {
    m: usize,
    value: f64,
    lower: f64,
    upper: f64,
}

/// `oracle_convergence.csv` with columns `m,value,lower,upper`.
pub fn convergence_csv(dir: &Path, rows: &[OracleResult]) -> Result<(), RunError> {
    write_csv(
        &dir.join("oracle_convergence.csv"),
        rows.iter().map(|r| ConvergenceRow { m: r.m, value: r.value, lower: r.bracket.0, upper: r.bracket.1 }),
    )
}
